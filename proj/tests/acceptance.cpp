// Acceptance gate: every release criterion, one printed pass/fail line each.
// Runs against the library only; exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "hud/harness.hpp"

using namespace hud;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return buf;
}

Tensor2D random_tensor(RngStream& rng, int rows, int cols, double scale = 1.0) {
    Tensor2D t(rows, cols);
    for (auto& v : t.data) v = scale * rng.normal();
    return t;
}

// ---------------------------------------------------------------- criterion 1

bool gradient_suite(std::string& detail) {
    RunConfig cfg;  // desk defaults: 2 frames, 4 queries, widths 16/8, 3 draws
    cfg.batch_size = 4;
    cfg.dataset_size = 4;
    cfg.distractor_count = 0;
    auto t0 = std::chrono::steady_clock::now();
    GradCheckReport report = run_grad_check(cfg);
    double elapsed = seconds_since(t0);
    detail = format("max rel err %.3g over %zu coordinates, %.1fs", report.max_rel_err,
                    report.entries.size(), elapsed);
    return report.pass && report.max_rel_err <= 1e-4 && elapsed < 120.0;
}

// ---------------------------------------------------------------- criterion 2
// Naive loop oracles, written independently of the library internals.

double odot(const Tensor2D& a, int i, const Tensor2D& b, int j) {
    double s = 0.0;
    for (int d = 0; d < a.cols; ++d) s += a.at(i, d) * b.at(j, d);
    return s;
}

std::vector<double> osoftmax(const std::vector<double>& x) {
    double z = 0.0;
    for (double v : x) z += std::exp(v);
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]) / z;
    return out;
}

std::vector<double> oscores(const Tensor2D& c, const Tensor2D& t, bool matched) {
    std::vector<double> out(c.rows);
    for (int i = 0; i < c.rows; ++i) {
        if (matched) {
            out[i] = odot(c, i, t, i);
        } else {
            double best = odot(c, i, t, 0);
            for (int j = 1; j < t.rows; ++j) best = std::max(best, odot(c, i, t, j));
            out[i] = best;
        }
    }
    return out;
}

double osim(const Tensor2D& c, const Tensor2D& t, const Tensor2D& bias, bool matched,
            bool use_bias) {
    std::vector<double> s = oscores(c, t, matched);
    std::vector<double> w = osoftmax(s);
    if (use_bias)
        for (size_t i = 0; i < w.size(); ++i) w[i] += bias.at(0, static_cast<int>(i));
    double out = 0.0;
    for (size_t i = 0; i < s.size(); ++i) out += w[i] * s[i];
    return out;
}

double orank(const Tensor2D& m, double tau) {
    double acc = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        double z = 0.0;
        for (int j = 0; j < m.cols; ++j) z += std::exp(m.at(i, j) / tau);
        acc += -std::log(std::exp(m.at(i, i) / tau) / z);
    }
    return acc / m.rows;
}

std::vector<double> odegree(const Tensor2D& m, int i, double tau, bool target_side) {
    int n = target_side ? m.rows : m.cols;
    std::vector<double> logits(n);
    for (int j = 0; j < n; ++j) logits[j] = (target_side ? m.at(j, i) : m.at(i, j)) / tau;
    return osoftmax(logits);
}

double oreg(const Tensor2D& h, const Tensor2D& a, double tau) {
    auto kl = [](const std::vector<double>& p, const std::vector<double>& q) {
        double acc = 0.0;
        for (size_t i = 0; i < p.size(); ++i) acc += p[i] * std::log(p[i] / q[i]);
        return acc;
    };
    double acc = 0.0;
    for (int i = 0; i < h.rows; ++i) {
        acc += kl(odegree(a, i, tau, true), odegree(h, i, tau, false));
        acc += kl(odegree(h, i, tau, true), odegree(a, i, tau, false));
    }
    return acc / (2.0 * h.rows);
}

bool oracle_equivalence(std::string& detail) {
    RngStream rng(2024);
    double worst = 0.0;
    auto track = [&worst](double got, double want) {
        worst = std::max(worst, std::abs(got - want));
    };

    for (int it = 0; it < 1000; ++it) {
        int b = static_cast<int>(rng.uniform_int(4)) + 1;
        int k = static_cast<int>(rng.uniform_int(8)) + 1;
        int d = static_cast<int>(rng.uniform_int(8)) + 1;
        double tau = 0.2 + 0.8 * rng.uniform();
        Tensor2D c = random_tensor(rng, k, d);
        Tensor2D t = random_tensor(rng, k, d);
        Tensor2D bias = random_tensor(rng, 1, k, 0.3);

        for (bool matched : {false, true}) {
            SimilarityMode mode =
                matched ? SimilarityMode::kMatchedIndex : SimilarityMode::kMaxOverTarget;
            Tensor2D s = token_scores(c, t, mode);
            std::vector<double> s_want = oscores(c, t, matched);
            for (int i = 0; i < k; ++i) track(s.at(0, i), s_want[i]);

            Tensor2D w = similarity_bias(s, bias, true);
            std::vector<double> w_want = osoftmax(s_want);
            for (int i = 0; i < k; ++i) track(w.at(0, i), w_want[i] + bias.at(0, i));

            for (bool use_bias : {false, true})
                track(hierarchical_similarity(c, t, bias, mode, use_bias),
                      osim(c, t, bias, matched, use_bias));
        }

        BatchSims sims;
        sims.holistic = random_tensor(rng, b, b);
        sims.atomistic = random_tensor(rng, b, b);
        Tensor2D combined = sims.holistic;
        for (size_t i = 0; i < combined.size(); ++i) combined.data[i] += sims.atomistic.data[i];
        track(rank_loss(sims, tau), orank(combined, tau));

        for (int i = 0; i < b; ++i)
            for (bool side : {false, true}) {
                Tensor2D got = similarity_degree_distribution(sims.holistic, i, tau, side);
                std::vector<double> want = odegree(sims.holistic, i, tau, side);
                for (int j = 0; j < b; ++j) track(got.at(0, j), want[j]);
            }

        track(distribution_regularization(sims, tau), oreg(sims.holistic, sims.atomistic, tau));
    }
    detail = format("max deviation %.3g over 1000 instances", worst);
    return worst <= 1e-12;
}

// ---------------------------------------------------------------- criterion 3

bool loss_identities(std::string& detail) {
    RngStream rng(31);
    double worst_rank = 0.0, worst_reg = 0.0;
    bool exact = true;

    for (int b = 1; b <= 6; ++b) {
        BatchSims sims;
        sims.holistic = Tensor2D::full(b, b, rng.normal());
        sims.atomistic = Tensor2D::full(b, b, rng.normal());
        worst_rank = std::max(worst_rank, std::abs(rank_loss(sims, 0.1) - std::log(double(b))));
    }

    for (int it = 0; it < 50; ++it) {
        int b = static_cast<int>(rng.uniform_int(4)) + 1;
        Tensor2D m = random_tensor(rng, b, b);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < i; ++j) m.at(i, j) = m.at(j, i);
        BatchSims sims;
        sims.holistic = m;
        sims.atomistic = m;
        worst_reg = std::max(worst_reg, std::abs(distribution_regularization(sims, 0.5)));
    }

    for (int it = 0; it < 100; ++it) {
        int b = static_cast<int>(rng.uniform_int(4)) + 1;
        double tau = 0.2 + 0.8 * rng.uniform();
        BatchSims sims;
        sims.holistic = random_tensor(rng, b, b);
        sims.atomistic = random_tensor(rng, b, b);
        double rank = rank_loss(sims, tau);
        double reg = distribution_regularization(sims, tau);
        for (double kappa : {0.0, 0.25, 0.5, 1.0, 2.0})
            if (total_loss(sims, tau, kappa) != rank + kappa * reg) exact = false;
    }

    detail = format("|rank - ln B| max %.3g, symmetric reg max %.3g, kappa composition %s",
                    worst_rank, worst_reg, exact ? "exact" : "broken");
    return worst_rank <= 1e-9 && worst_reg <= 1e-12 && exact;
}

// ---------------------------------------------------------------- criterion 4

bool replication_coincidence(std::string& detail) {
    RngStream rng(41);
    int mismatches = 0;
    for (int it = 0; it < 1000; ++it) {
        int k = static_cast<int>(rng.uniform_int(8)) + 1;
        int d = static_cast<int>(rng.uniform_int(8)) + 1;
        Tensor2D c = l2_normalize_rows(random_tensor(rng, k, d));
        Tensor2D row = random_tensor(rng, 1, d);
        Tensor2D t(k, d);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < d; ++j) t.at(i, j) = row.at(0, j);
        Tensor2D by_max = token_scores(c, t, SimilarityMode::kMaxOverTarget);
        Tensor2D by_match = token_scores(c, t, SimilarityMode::kMatchedIndex);
        if (std::memcmp(by_max.data.data(), by_match.data.data(),
                        by_max.size() * sizeof(double)) != 0)
            ++mismatches;
    }
    detail = format("%d of 1000 replicated-target instances differ", mismatches);
    return mismatches == 0;
}

// ---------------------------------------------------------------- criterion 5

bool reparametrization_statistics(std::string& detail) {
    const int n = 100000;
    Tensor2D mu(1, 3, {0.5, -1.0, 2.0});
    Tensor2D sigma(1, 3, {1.5, 0.1, -2.0});
    TextGaussian g;
    g.mu = ad::constant(mu);
    g.sigma = ad::constant(sigma);

    RngStream rng(500);
    Tensor2D noise(n, 3);
    for (auto& v : noise.data) v = rng.normal();
    ad::Var draws = sample_modification(g, noise);

    double worst_mean = 0.0, worst_var = 0.0;
    bool ok = true;
    for (int j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += draws.value().at(i, j);
        mean /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            double d = draws.value().at(i, j) - mean;
            var += d * d;
        }
        var /= n - 1;
        double sd = std::abs(sigma.at(0, j));
        double mean_err = std::abs(mean - mu.at(0, j)) / (3.0 * sd / std::sqrt(double(n)));
        double var_err = std::abs(var - sd * sd) / (sd * sd);
        worst_mean = std::max(worst_mean, mean_err);
        worst_var = std::max(worst_var, var_err);
        if (mean_err > 1.0 || var_err > 0.05) ok = false;
    }

    // exact collapse at sigma = 0
    Tensor2D zero_sigma(1, 3);
    TextGaussian gz;
    gz.mu = ad::constant(mu);
    gz.sigma = ad::constant(zero_sigma);
    ad::Var collapsed = sample_modification(gz, noise);
    bool collapse_exact = true;
    for (int i = 0; i < n && collapse_exact; ++i)
        for (int j = 0; j < 3; ++j)
            if (collapsed.value().at(i, j) != mu.at(0, j)) collapse_exact = false;

    detail = format("mean err %.2f of the 3 sigma/sqrt(n) budget, var err %.3f of 0.05, "
                    "sigma=0 collapse %s",
                    worst_mean, worst_var, collapse_exact ? "bit-exact" : "BROKEN");
    return ok && collapse_exact;
}

// ------------------------------------------------------------- criteria 6 + 7

RunConfig benchmark_config() {
    RunConfig cfg;  // ambiguous pronouns and a 10% subject, per the defaults
    cfg.dataset_size = 2000;
    cfg.distractor_count = 200;
    cfg.scene_objects = 5;
    cfg.l_queries = 2;
    cfg.d_a = 8;
    cfg.steps = 500;
    cfg.batch_size = 16;
    cfg.eval_queries = 400;
    cfg.eval_interval = 500;
    cfg.eval_ks = "1,5";
    return cfg;
}

struct BenchmarkOutcome {
    bool directional = false;
    bool learning = false;
    std::string directional_detail;
    std::string learning_detail;
};

BenchmarkOutcome run_benchmark() {
    const std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
    auto t0 = std::chrono::steady_clock::now();

    auto series = [&seeds](RunConfig cfg) {
        std::vector<double> out;
        for (uint64_t s : seeds) {
            cfg.seed = s;
            RunResult r = train_run(cfg);
            out.push_back(r.records.back().recall.at(1));
        }
        return out;
    };
    auto mean = [](const std::vector<double>& v) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc / v.size();
    };

    RunConfig base = benchmark_config();
    std::vector<double> full = series(base);  // the U=3 grid point
    std::vector<double> d1 = series(derivative_config(base, "d1"));
    std::vector<double> d3 = series(derivative_config(base, "d3"));
    std::vector<double> d6 = series(derivative_config(base, "d6"));

    RunConfig u1_cfg = base;
    u1_cfg.u_samples = 1;
    RunConfig u2_cfg = base;
    u2_cfg.u_samples = 2;
    std::vector<double> u1 = series(u1_cfg);
    std::vector<double> u2 = series(u2_cfg);

    // best U over the sample-count grid {1, 2, 3}; ties favor more draws
    const std::vector<double>* best_u = &u1;
    int best_u_value = 1;
    if (mean(u2) >= mean(*best_u)) {
        best_u = &u2;
        best_u_value = 2;
    }
    if (mean(full) >= mean(*best_u)) {
        best_u = &full;
        best_u_value = 3;
    }

    int u_wins = 0;
    for (size_t i = 0; i < seeds.size(); ++i)
        if ((*best_u)[i] >= d1[i]) ++u_wins;

    double elapsed = seconds_since(t0);
    BenchmarkOutcome out;
    bool levels_ok = mean(full) >= mean(d3) && mean(full) >= mean(d6);
    out.directional = levels_ok && u_wins >= 4 && elapsed <= 900.0;
    out.directional_detail = format(
        "mean R@1 full %.4f vs d3 %.4f vs d6 %.4f, best U=%d beats d1 on %d of 5 seeds, %.0fs",
        mean(full), mean(d3), mean(d6), best_u_value, u_wins, elapsed);

    double bar = 10.0 / base.distractor_count;
    int learners = 0;
    for (double r : full)
        if (r >= bar) ++learners;
    out.learning = learners >= 4;
    out.learning_detail = format("R@1 >= %.3f on %d of 5 seeds (full runs reused)", bar, learners);
    return out;
}

// ---------------------------------------------------------------- criterion 8

bool pronoun_fixtures(std::string& detail) {
    std::vector<std::string> pronouns{"it", "them"};
    double three = pronoun_ratio(
        corpus_from_lines({"move it left", "add a dog", "paint them red"}, pronouns));
    double none = pronoun_ratio(corpus_from_lines({"add a dog", "remove the hat"}, pronouns));
    detail = format("3-line fixture %.2f%%, pronoun-free fixture %.0f%%", three, none);
    return three == 200.0 / 3.0 && none == 0.0;
}

// ---------------------------------------------------------------- criterion 9

bool determinism_and_persistence(std::string& detail) {
    namespace fs = std::filesystem;
    RunConfig cfg;
    cfg.dataset_size = 16;
    cfg.distractor_count = 8;
    cfg.batch_size = 4;
    cfg.steps = 5;
    cfg.eval_ks = "1,5";
    cfg.seed = 3;

    RunResult a = train_run(cfg);
    RunResult b = train_run(cfg);
    bool bytes_equal = a.jsonl == b.jsonl && !a.jsonl.empty();

    Dataset ds = generate_dataset(cfg, cfg.seed);
    std::map<int, double> before = evaluate_dataset(a.model, ds, 0, {1, 5});
    fs::path path = fs::temp_directory_path() / "hud_acceptance_ckpt.bin";
    save_checkpoint(path.string(), cfg, a.model.params());
    Model restored(cfg, load_checkpoint(path.string(), cfg));
    std::map<int, double> after = evaluate_dataset(restored, ds, 0, {1, 5});
    bool rt_exact = before == after;

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    bytes[bytes.size() / 3] = static_cast<char>(bytes[bytes.size() / 3] ^ 0x10);
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    bool checksum_rejects = false;
    try {
        load_checkpoint(path.string(), cfg);
    } catch (const std::runtime_error& e) {
        checksum_rejects = std::string(e.what()).find("checksum") != std::string::npos;
    }
    fs::remove(path);

    detail = format("metrics bytes %s, round-trip %s, corruption %s",
                    bytes_equal ? "identical" : "DIFFER",
                    rt_exact ? "bit-exact" : "DRIFTED",
                    checksum_rejects ? "rejected" : "ACCEPTED");
    return bytes_equal && rt_exact && checksum_rejects;
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        std::function<bool(std::string&)> run;
    };

    BenchmarkOutcome bench;
    bool bench_ran = false;
    auto ensure_bench = [&]() {
        if (!bench_ran) {
            bench = run_benchmark();
            bench_ran = true;
        }
    };

    std::vector<Criterion> criteria{
        {1, "gradient suite", gradient_suite},
        {2, "oracle equivalence", oracle_equivalence},
        {3, "loss identities", loss_identities},
        {4, "replication coincidence", replication_coincidence},
        {5, "reparametrization statistics", reparametrization_statistics},
        {6, "directional ablation",
         [&](std::string& d) {
             ensure_bench();
             d = bench.directional_detail;
             return bench.directional;
         }},
        {7, "learning check",
         [&](std::string& d) {
             ensure_bench();
             d = bench.learning_detail;
             return bench.learning;
         }},
        {8, "pronoun ratio fixtures", pronoun_fixtures},
        {9, "determinism and persistence", determinism_and_persistence},
    };

    int failures = 0;
    for (auto& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = format("exception: %s", e.what());
        }
        if (!ok) ++failures;
        std::printf("criterion %d [%s] %s: %s\n", c.number, ok ? "PASS" : "FAIL", c.name,
                    detail.c_str());
        std::fflush(stdout);
    }
    if (failures == 0)
        std::printf("acceptance: all 9 criteria passed\n");
    else
        std::printf("acceptance: %d criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
