#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hud/harness.hpp"

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << content;
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) lines.push_back(line);
    return lines;
}

hud::Model model_from_config(const hud::RunConfig& cfg) {
    if (!cfg.checkpoint_path.empty()) {
        std::ifstream probe(cfg.checkpoint_path, std::ios::binary);
        if (probe) {
            hud::ParameterStore store = hud::load_checkpoint(cfg.checkpoint_path, cfg);
            return hud::Model(cfg, std::move(store));
        }
    }
    return hud::Model(cfg, cfg.seed);
}

std::string scene_summary(const hud::RunConfig& cfg, const hud::LatentScene& scene) {
    std::string out;
    for (size_t i = 0; i < scene.objects.size(); ++i) {
        const auto& o = scene.objects[i];
        if (i) out += ";";
        out += hud::vocab_word(cfg, hud::object_vocab_id(cfg, o.object_index)) + ":" +
               hud::vocab_word(cfg, hud::attribute_vocab_id(cfg, o.attribute_index)) + ":" +
               std::to_string(o.token_count);
    }
    return out;
}

int cmd_train(const hud::RunConfig& cfg) {
    try {
        hud::RunResult run = hud::train_run(cfg);
        write_file(cfg.metrics_jsonl, run.jsonl);
        write_file(cfg.metrics_csv, run.csv);
        if (!cfg.checkpoint_path.empty())
            hud::save_checkpoint(cfg.checkpoint_path, cfg, run.model.params());
        std::cout << "final " << hud::metrics_json_line(run.records.back(), cfg.metrics_wall_time)
                  << "\n";
        std::cout << "wrote " << cfg.metrics_jsonl << " (" << run.records.size()
                  << " records), " << cfg.metrics_csv;
        if (!cfg.checkpoint_path.empty()) std::cout << ", " << cfg.checkpoint_path;
        std::cout << "\n";
        return 0;
    } catch (const hud::TrainingDiverged& e) {
        write_file(cfg.metrics_jsonl, e.jsonl);
        std::cerr << "error: " << e.what() << " (diagnostic record in " << cfg.metrics_jsonl
                  << ")\n";
        return 1;
    }
}

int cmd_eval(const hud::RunConfig& cfg) {
    hud::Model model = model_from_config(cfg);
    hud::Dataset data = hud::generate_dataset(cfg, cfg.seed);
    auto recall =
        hud::evaluate_dataset(model, data, cfg.eval_queries, hud::parse_int_list(cfg.eval_ks));
    hud::MetricsRecord rec;
    rec.step = model.params().step;
    rec.recall = recall;
    rec.config_hash = hud::config_hash(cfg);
    std::cout << hud::metrics_json_line(rec, false) << "\n";
    return 0;
}

int cmd_ablate(const hud::RunConfig& cfg, const std::string& derivative) {
    if (!derivative.empty()) {
        hud::RunConfig derived = hud::derivative_config(cfg, derivative);
        return cmd_train(derived);
    }
    // whole grid: one training run per derivative, one summary table
    std::string csv;
    bool first = true;
    for (const std::string& name : hud::ablation_names()) {
        if (name == "d9" && (cfg.ablate_d8 || cfg.kappa == 0.0)) {
            std::cout << name << " skipped (needs a nonzero consistency weight)\n";
            continue;
        }
        hud::RunResult run = hud::run_ablation(cfg, name);
        write_file(cfg.metrics_jsonl + "." + name, run.jsonl);
        const hud::MetricsRecord& rec = run.records.back();
        auto cols = hud::metrics_columns(rec, cfg.metrics_wall_time);
        if (first) {
            csv = "derivative";
            for (const auto& c : cols) csv += "," + c.first;
            csv += "\n";
            first = false;
        }
        csv += name;
        for (const auto& c : cols) csv += "," + c.second;
        csv += "\n";
        std::cout << name << " " << hud::metrics_json_line(rec, cfg.metrics_wall_time) << "\n";
    }
    write_file(cfg.metrics_csv, csv);
    std::cout << "wrote " << cfg.metrics_csv << "\n";
    return 0;
}

int cmd_sweep(const hud::RunConfig& cfg, const std::string& key,
              const std::string& values_csv) {
    std::vector<std::string> values;
    {
        std::string cur;
        for (char c : values_csv) {
            if (c == ',') {
                values.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        values.push_back(cur);
    }
    std::string csv;
    std::vector<hud::SweepRow> rows = hud::sweep(cfg, key, values, &csv);
    write_file(cfg.metrics_csv, csv);
    for (const auto& row : rows)
        std::cout << key << "=" << row.value << " "
                  << hud::metrics_json_line(row.final_record, cfg.metrics_wall_time) << "\n";
    std::cout << "wrote " << cfg.metrics_csv << "\n";
    return 0;
}

int cmd_stats(const hud::RunConfig& cfg, const std::string& corpus_path) {
    hud::Corpus corpus;
    if (!corpus_path.empty()) {
        corpus = hud::corpus_from_lines(read_lines(corpus_path),
                                        hud::parse_word_list(cfg.pronouns));
    } else {
        corpus = hud::corpus_from_dataset(hud::generate_dataset(cfg, cfg.seed));
    }
    size_t with_pronoun = 0;
    for (const auto& text : corpus.texts) {
        for (int id : text) {
            if (corpus.pronoun_ids.count(id)) {
                ++with_pronoun;
                break;
            }
        }
    }
    std::printf("texts %zu\n", corpus.texts.size());
    std::printf("with_pronoun %zu\n", with_pronoun);
    std::printf("pronoun_ratio %.17g\n", hud::pronoun_ratio(corpus));
    return 0;
}

int cmd_gradcheck(const hud::RunConfig& cfg) {
    hud::GradCheckReport report = hud::run_grad_check(cfg);
    std::printf("checked %zu coordinates, max_rel_err %.3e\n", report.entries.size(),
                report.max_rel_err);
    std::printf("worst %s[%d]: analytic %.12g numeric %.12g\n", report.worst.name.c_str(),
                report.worst.index, report.worst.analytic, report.worst.numeric);
    std::printf("%s\n", report.pass ? "PASS" : "FAIL");
    return report.pass ? 0 : 1;
}

int cmd_dump(const hud::RunConfig& cfg, const std::string& out_path) {
    hud::Model model = model_from_config(cfg);
    hud::Dataset data = hud::generate_dataset(cfg, cfg.seed);
    hud::dump_embeddings(model, data, cfg.dump_count, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_gen_data(const hud::RunConfig& cfg, const std::string& prefix) {
    hud::Dataset data = hud::generate_dataset(cfg, cfg.seed);

    std::string texts;
    for (const auto& t : data.triplets) texts += hud::render_text(cfg, t.text_tokens) + "\n";
    write_file(prefix + "_texts.txt", texts);

    std::string tsv = "triplet\tambiguous\tsubject\tnew_attribute\ttext\treference\ttarget\n";
    for (size_t i = 0; i < data.triplets.size(); ++i) {
        const auto& t = data.triplets[i];
        tsv += std::to_string(i) + "\t" + (t.ambiguous ? "1" : "0") + "\t" +
               std::to_string(t.subject_index) + "\t" +
               hud::vocab_word(cfg, hud::attribute_vocab_id(cfg, t.new_attribute)) + "\t" +
               hud::render_text(cfg, t.text_tokens) + "\t" +
               scene_summary(cfg, t.reference) + "\t" + scene_summary(cfg, t.target) + "\n";
    }
    write_file(prefix + "_scenes.tsv", tsv);

    hud::RngStream rng = hud::RngStream(cfg.seed).derive(hud::fnv1a64("stats", 5), 0);
    std::printf("triplets %zu\n", data.triplets.size());
    std::printf("database %zu\n", data.database.size());
    std::printf("oracle_recall@1 %.17g\n", hud::oracle_recall_at_1(data));
    std::printf("text_only_recall@1 %.17g\n", hud::text_only_recall_at_1(data, rng));
    std::printf("pronoun_ratio %.17g\n", hud::pronoun_ratio(hud::corpus_from_dataset(data)));
    std::cout << "wrote " << prefix << "_texts.txt, " << prefix << "_scenes.tsv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hud: composed video retrieval testbed"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed = 0;
    std::string derivative;
    std::string sweep_key;
    std::string sweep_values;
    std::string corpus_path;
    std::string dump_out = "embeddings.tsv";
    std::string data_prefix = "data";

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key = value config file");
        sub->add_option("--seed", seed, "override the config seed");
        return sub;
    };

    CLI::App* train = add_common(app.add_subcommand("train", "train and write metrics"));
    CLI::App* eval = add_common(app.add_subcommand("eval", "evaluate recall@k"));
    CLI::App* ablate = add_common(app.add_subcommand("ablate", "run model derivatives"));
    ablate->add_option("--derivative", derivative, "one of full, d1 .. d9 (default: grid)");
    CLI::App* sweep = add_common(app.add_subcommand("sweep", "train once per value"));
    sweep->add_option("--key", sweep_key, "config key to sweep")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();
    CLI::App* stats = add_common(app.add_subcommand("stats", "corpus pronoun statistics"));
    stats->add_option("--corpus", corpus_path, "text file, one text per line");
    CLI::App* gradcheck =
        add_common(app.add_subcommand("gradcheck", "finite-difference gradient check"));
    CLI::App* dump =
        add_common(app.add_subcommand("dump-embeddings", "export labeled embeddings"));
    dump->add_option("--out", dump_out, "output TSV path");
    CLI::App* gen =
        add_common(app.add_subcommand("gen-data", "write the synthetic benchmark to disk"));
    gen->add_option("--out", data_prefix, "output file prefix");

    CLI11_PARSE(app, argc, argv);

    try {
        hud::RunConfig cfg =
            config_path.empty() ? hud::RunConfig{} : hud::load_config_file(config_path);
        CLI::App* sub = app.get_subcommands().front();
        if (sub->count("--seed")) cfg.seed = seed;
        hud::validate_config(cfg);

        if (sub == train) return cmd_train(cfg);
        if (sub == eval) return cmd_eval(cfg);
        if (sub == ablate) return cmd_ablate(cfg, derivative);
        if (sub == sweep) return cmd_sweep(cfg, sweep_key, sweep_values);
        if (sub == stats) return cmd_stats(cfg, corpus_path);
        if (sub == gradcheck) return cmd_gradcheck(cfg);
        if (sub == dump) return cmd_dump(cfg, dump_out);
        if (sub == gen) return cmd_gen_data(cfg, data_prefix);
        std::cerr << "error: unhandled subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
