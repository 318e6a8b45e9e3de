#include "hud/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"

namespace hud {

namespace {

const uint64_t kBatchTag = fnv1a64("batch", 5);
const uint64_t kNoiseTag = fnv1a64("noise", 5);

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// First b entries of a partial Fisher-Yates shuffle of [0, n).
std::vector<int> sample_distinct(RngStream& rng, int n, int b) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < b; ++i) {
        int j = i + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(b);
    return idx;
}

bool message_signals_divergence(const std::exception& e) {
    return std::string(e.what()).find("non-finite") != std::string::npos;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> metrics_columns(const MetricsRecord& rec,
                                                                 bool with_wall_time) {
    std::vector<std::pair<std::string, std::string>> cols;
    cols.emplace_back("step", std::to_string(rec.step));
    cols.emplace_back("loss", fmt(rec.loss));
    cols.emplace_back("loss_rank", fmt(rec.loss_rank));
    cols.emplace_back("loss_kl", fmt(rec.loss_kl));
    for (const auto& [k, v] : rec.recall)
        cols.emplace_back("recall@" + std::to_string(k), fmt(v));
    if (with_wall_time) cols.emplace_back("wall_time_ms", fmt(rec.wall_time_ms));
    cols.emplace_back("config_hash", rec.config_hash);
    return cols;
}

std::string metrics_json_line(const MetricsRecord& rec, bool with_wall_time) {
    nlohmann::json j;
    j["step"] = rec.step;
    j["loss"] = rec.loss;
    j["loss_rank"] = rec.loss_rank;
    j["loss_kl"] = rec.loss_kl;
    for (const auto& [k, v] : rec.recall) j["recall@" + std::to_string(k)] = v;
    if (with_wall_time) j["wall_time_ms"] = rec.wall_time_ms;
    j["config_hash"] = rec.config_hash;
    return j.dump();
}

std::string metrics_csv_table(const std::vector<MetricsRecord>& records, bool with_wall_time) {
    if (records.empty()) return "";
    std::string out;
    auto head = metrics_columns(records.front(), with_wall_time);
    for (size_t i = 0; i < head.size(); ++i) {
        if (i) out += ",";
        out += head[i].first;
    }
    out += "\n";
    for (const auto& rec : records) {
        auto cols = metrics_columns(rec, with_wall_time);
        for (size_t i = 0; i < cols.size(); ++i) {
            if (i) out += ",";
            out += cols[i].second;
        }
        out += "\n";
    }
    return out;
}

std::map<int, double> evaluate_recall(const Model& model, const std::vector<Triplet>& queries,
                                      const std::vector<DatabaseEntry>& database,
                                      const std::vector<int>& ks) {
    if (database.empty()) throw std::runtime_error("evaluate_recall: empty database");
    if (queries.empty()) throw std::runtime_error("evaluate_recall: no queries");
    if (queries.size() > database.size())
        throw std::runtime_error(
            "evaluate_recall: more queries than database entries (query i's true target "
            "must sit at database index i)");
    if (ks.empty()) throw std::runtime_error("evaluate_recall: empty k list");
    int max_k = *std::max_element(ks.begin(), ks.end());
    if (max_k > static_cast<int>(database.size()))
        throw std::runtime_error("evaluate_recall: k = " + std::to_string(max_k) +
                                 " exceeds database size " + std::to_string(database.size()));

    std::vector<Model::Composed> targets;
    targets.reserve(database.size());
    for (const auto& entry : database) targets.push_back(model.extend_target(entry.tokens));

    std::map<int, int> hits;
    for (int k : ks) hits[k] = 0;
    for (size_t i = 0; i < queries.size(); ++i) {
        Model::Composed q = model.compose_query(queries[i], static_cast<int>(i));
        std::vector<double> scores(database.size());
        for (size_t j = 0; j < database.size(); ++j) scores[j] = model.pair_score(q, targets[j]);
        double own = scores[i];
        int rank = 1;
        for (size_t j = 0; j < database.size(); ++j) {
            if (scores[j] > own || (scores[j] == own && j < i)) ++rank;
        }
        for (int k : ks)
            if (rank <= k) ++hits[k];
    }

    std::map<int, double> out;
    for (int k : ks) out[k] = static_cast<double>(hits[k]) / static_cast<double>(queries.size());
    return out;
}

std::map<int, double> evaluate_dataset(const Model& model, const Dataset& data,
                                       int query_limit, const std::vector<int>& ks) {
    int n = static_cast<int>(data.triplets.size());
    int q = (query_limit <= 0 || query_limit > n) ? n : query_limit;
    std::vector<Triplet> queries(data.triplets.begin(), data.triplets.begin() + q);
    std::vector<DatabaseEntry> database(data.database.begin(), data.database.begin() + q);
    database.insert(database.end(), data.database.begin() + n, data.database.end());
    return evaluate_recall(model, queries, database, ks);
}

RunResult train_run(const RunConfig& cfg, const Dataset& data) {
    validate_config(cfg);
    int n = static_cast<int>(data.triplets.size());
    if (n == 0) throw std::runtime_error("train_run: empty dataset");
    if (n < cfg.batch_size)
        throw std::runtime_error("train_run: dataset smaller than one batch");

    Model model(cfg, cfg.seed);
    std::vector<std::string> frozen = frozen_params(cfg);
    AdamConfig adam{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
                    cfg.weight_decay};
    std::string hash = config_hash(cfg);
    std::vector<int> ks = parse_int_list(cfg.eval_ks);
    uint64_t root_seed = cfg.seed;

    std::set<uint64_t> points;
    if (cfg.steps == 0) {
        points.insert(0);
    } else {
        if (cfg.eval_interval > 0)
            for (int s = cfg.eval_interval; s <= cfg.steps; s += cfg.eval_interval)
                points.insert(static_cast<uint64_t>(s));
        points.insert(static_cast<uint64_t>(cfg.steps));
    }

    double t0 = now_ms();
    std::vector<MetricsRecord> records;
    std::string jsonl;

    auto record_point = [&](uint64_t step, const LossBreakdown& lb) {
        MetricsRecord rec;
        rec.step = step;
        rec.loss = lb.total;
        rec.loss_rank = lb.rank;
        rec.loss_kl = lb.kl;
        rec.recall = evaluate_dataset(model, data, cfg.eval_queries, ks);
        rec.wall_time_ms = now_ms() - t0;
        rec.config_hash = hash;
        records.push_back(rec);
        jsonl += metrics_json_line(rec, cfg.metrics_wall_time) + "\n";
    };

    auto diverged = [&](uint64_t step, const std::string& why) {
        nlohmann::json j;
        j["event"] = "diverged";
        j["step"] = step;
        j["config_hash"] = hash;
        j["detail"] = why;
        jsonl += j.dump() + "\n";
        throw TrainingDiverged(
            "training diverged at step " + std::to_string(step) + ": " + why, jsonl);
    };

    auto step_batch = [&](uint64_t step, bool with_grad) {
        RngStream batch_rng = RngStream(root_seed).derive(kBatchTag, step);
        RngStream noise_rng = RngStream(root_seed).derive(kNoiseTag, step);
        std::vector<int> idx = sample_distinct(batch_rng, n, cfg.batch_size);
        std::vector<const Triplet*> batch;
        batch.reserve(idx.size());
        for (int i : idx) batch.push_back(&data.triplets[i]);
        BatchNoise noise = draw_batch_noise(noise_rng, cfg, cfg.batch_size);
        return model.batch_loss(batch, noise, with_grad);
    };

    if (cfg.steps == 0) {
        record_point(0, step_batch(0, false));
    } else {
        for (int s = 1; s <= cfg.steps; ++s) {
            uint64_t step = static_cast<uint64_t>(s);
            LossBreakdown lb;
            try {
                lb = step_batch(step, true);
            } catch (const std::runtime_error& e) {
                if (message_signals_divergence(e)) diverged(step, e.what());
                throw;
            }
            if (!std::isfinite(lb.total)) diverged(step, "non-finite loss");
            try {
                adam_step(model.params(), adam, frozen);
            } catch (const std::runtime_error& e) {
                if (message_signals_divergence(e)) diverged(step, e.what());
                throw;
            }
            if (points.count(step)) record_point(step, lb);
        }
    }

    RunResult out{std::move(model), std::move(records), std::move(jsonl), ""};
    out.csv = metrics_csv_table(out.records, cfg.metrics_wall_time);
    return out;
}

RunResult train_run(const RunConfig& cfg) {
    return train_run(cfg, generate_dataset(cfg, cfg.seed));
}

const std::vector<std::string>& ablation_names() {
    static const std::vector<std::string> names = {"full", "d1", "d2", "d3", "d4",
                                                   "d5",   "d6", "d7", "d8", "d9"};
    return names;
}

RunConfig derivative_config(const RunConfig& cfg, const std::string& name) {
    RunConfig out = cfg;
    if (name == "full") {
    } else if (name == "d1") {
        out.ablate_d1 = true;
    } else if (name == "d2") {
        out.ablate_d2 = true;
    } else if (name == "d3") {
        out.ablate_d3 = true;
    } else if (name == "d4") {
        out.ablate_d4 = true;
    } else if (name == "d5") {
        out.ablate_d5 = true;
    } else if (name == "d6") {
        out.ablate_d6 = true;
    } else if (name == "d7") {
        out.ablate_d7 = true;
    } else if (name == "d8") {
        out.ablate_d8 = true;
    } else if (name == "d9") {
        out.ablate_d9 = true;
    } else {
        throw std::runtime_error("derivative_config: unknown derivative '" + name + "'");
    }
    validate_config(out);
    return out;
}

RunResult run_ablation(const RunConfig& cfg, const std::string& name) {
    RunConfig derived = derivative_config(cfg, name);
    return train_run(derived);
}

std::vector<SweepRow> sweep(const RunConfig& cfg, const std::string& key,
                            const std::vector<std::string>& values, std::string* csv) {
    if (values.empty()) throw std::runtime_error("sweep: empty value list");
    std::vector<SweepRow> rows;
    for (const std::string& value : values) {
        RunConfig point = cfg;
        set_config_key(point, key, value);
        validate_config(point);
        RunResult run = train_run(point);
        if (run.records.empty()) throw std::runtime_error("sweep: run produced no records");
        rows.push_back({value, run.records.back()});
    }
    if (csv) {
        std::string out = "value";
        for (const auto& col : metrics_columns(rows.front().final_record, cfg.metrics_wall_time))
            out += "," + col.first;
        out += "\n";
        for (const auto& row : rows) {
            out += row.value;
            for (const auto& col : metrics_columns(row.final_record, cfg.metrics_wall_time))
                out += "," + col.second;
            out += "\n";
        }
        *csv = out;
    }
    return rows;
}

GradCheckReport run_grad_check(const RunConfig& cfg) {
    validate_config(cfg);
    RunConfig data_cfg = cfg;
    data_cfg.dataset_size = cfg.batch_size;
    data_cfg.distractor_count = 0;
    Dataset data = generate_dataset(data_cfg, cfg.seed);

    std::vector<const Triplet*> batch;
    for (const Triplet& t : data.triplets) batch.push_back(&t);
    RngStream noise_rng = RngStream(cfg.seed).derive(kNoiseTag, 0);
    BatchNoise noise = draw_batch_noise(noise_rng, cfg, cfg.batch_size);

    auto loss_fn = [&](ParameterStore& store, bool with_grad) {
        Model m(cfg, store);
        LossBreakdown lb = m.batch_loss(batch, noise, with_grad);
        if (with_grad) {
            for (auto& [name, e] : store.entries()) e.grad = m.params().entry(name).grad;
        }
        return lb.total;
    };

    ParameterStore store = init_params(cfg, cfg.seed);
    return grad_check(loss_fn, store, cfg.grad_check_eps, cfg.grad_check_samples, 1e-4);
}

void dump_embeddings(const Model& model, const Dataset& data, int count,
                     const std::string& path) {
    const RunConfig& cfg = model.config();
    int n = std::min<int>(count, static_cast<int>(data.triplets.size()));
    if (n < 1) throw std::runtime_error("dump_embeddings: nothing to dump");

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("dump_embeddings: cannot write '" + path + "'");
    f << "category\ttriplet\trow";
    for (int d = 0; d < cfg.d_h; ++d) f << "\te" << d;
    f << "\n";
    auto write_rows = [&](const char* category, int triplet, const Tensor2D& m, int row_begin,
                          int row_end) {
        for (int r = row_begin; r < row_end; ++r) {
            f << category << "\t" << triplet << "\t" << (r - row_begin);
            for (int d = 0; d < m.cols; ++d) f << "\t" << fmt(m.at(r, d));
            f << "\n";
        }
    };

    // read-only graphs; parameters enter as constants
    ParameterStore& store = const_cast<ParameterStore&>(model.params());
    for (int t = 0; t < n; ++t) {
        const Triplet& tr = data.triplets[t];
        GraphParams p(store, false);
        RngStream rng = RngStream(cfg.seed).derive(fnv1a64("eval", 4),
                                                   static_cast<uint64_t>(t));
        BatchNoise noise = draw_batch_noise(rng, cfg, 1);

        EncoderOutput enc_r = encode_video(p, tr.reference_tokens.frames, cfg);
        EncoderOutput enc_m = encode_text(p, tr.text_tokens, cfg);
        EncoderOutput enc_t = encode_video(p, tr.target_tokens.frames, cfg);
        write_rows("reference", t, enc_r.holistic.value(), 0, 1);
        write_rows("target", t, enc_t.holistic.value(), 0, 1);

        std::vector<int> padded = tr.text_tokens;
        padded.resize(static_cast<size_t>(cfg.l_text), kPadId);
        ad::Var mod_tokens = project_tokens(p, embed_tokens(p, padded));
        write_rows("modification", t, mod_tokens.value(), 0, mod_tokens.rows());

        if (!cfg.ablate_d3) {
            ad::Var samples;
            if (cfg.effective_u() > 0) {
                TextGaussian g =
                    modification_distribution(p, enc_m.holistic, enc_r.holistic, cfg);
                samples = sample_modification(g, noise.holistic[0]);
                write_rows("textual_probabilistic", t, samples.value(), 0, samples.rows());
            }
            ad::Var composed = build_holistic_composed(p, enc_r.holistic, enc_m.holistic,
                                                       samples, cfg.ablate_d2);
            write_rows("original_composition", t, composed.value(), 0, 1);
            if (composed.rows() > 1)
                write_rows("probabilistic_composition", t, composed.value(), 1,
                           composed.rows());
        }
        if (!cfg.ablate_d6) {
            ad::Var detail;
            if (cfg.ablate_d4) {
                detail = enc_r.atomistic;
            } else {
                TokenGaussian g =
                    reference_distribution(p, enc_r.atomistic, enc_m.atomistic, cfg);
                detail = sample_detail_tokens(g, noise.atomistic[0]);
            }
            ad::Var projected = project_tokens(p, detail);
            write_rows("visual_detail", t, projected.value(), 0, projected.rows());
        }
    }
    if (!f) throw std::runtime_error("dump_embeddings: write failed for '" + path + "'");
}

}  // namespace hud
