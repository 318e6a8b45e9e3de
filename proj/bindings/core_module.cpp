#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>

#include "hud/alignment.hpp"
#include "hud/harness.hpp"

namespace py = pybind11;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

hud::Tensor2D to_tensor(const DoubleArray& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    hud::Tensor2D t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + t.size(), t.data.begin());
    return t;
}

py::array_t<double> to_array(const hud::Tensor2D& t) {
    py::array_t<double> a(std::vector<py::ssize_t>{t.rows, t.cols});
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

hud::BatchSims to_sims(const std::optional<DoubleArray>& h,
                       const std::optional<DoubleArray>& a) {
    hud::BatchSims sims;
    if (h) sims.holistic = to_tensor(*h);
    if (a) sims.atomistic = to_tensor(*a);
    return sims;
}

py::dict record_to_dict(const hud::MetricsRecord& rec) {
    py::dict d;
    d["step"] = rec.step;
    d["loss"] = rec.loss;
    d["loss_rank"] = rec.loss_rank;
    d["loss_kl"] = rec.loss_kl;
    py::dict recall;
    for (const auto& [k, v] : rec.recall) recall[py::int_(k)] = v;
    d["recall"] = recall;
    d["config_hash"] = rec.config_hash;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "C++ core of the hud composed-retrieval testbed";

    m.def("softmax_rows",
          [](const DoubleArray& a) { return to_array(hud::softmax_rows(to_tensor(a))); },
          py::arg("x"), "Row-wise softmax of a 2-D array.");
    m.def("log_softmax_rows",
          [](const DoubleArray& a) { return to_array(hud::log_softmax_rows(to_tensor(a))); },
          py::arg("x"));
    m.def("l2_normalize_rows",
          [](const DoubleArray& a) { return to_array(hud::l2_normalize_rows(to_tensor(a))); },
          py::arg("x"));
    m.def("kl_categorical",
          [](const DoubleArray& p, const DoubleArray& q) {
              return hud::kl_categorical(to_tensor(p), to_tensor(q));
          },
          py::arg("p"), py::arg("q"), "KL(p || q) for 1xN categorical rows.");

    m.def("token_scores",
          [](const DoubleArray& c, const DoubleArray& t, const std::string& mode) {
              return to_array(
                  hud::token_scores(to_tensor(c), to_tensor(t), hud::similarity_mode_from(mode)));
          },
          py::arg("composed"), py::arg("target"), py::arg("mode") = "max");
    m.def("hierarchical_similarity",
          [](const DoubleArray& c, const DoubleArray& t, const DoubleArray& bias,
             const std::string& mode, bool use_bias) {
              return hud::hierarchical_similarity(to_tensor(c), to_tensor(t), to_tensor(bias),
                                                  hud::similarity_mode_from(mode), use_bias);
          },
          py::arg("composed"), py::arg("target"), py::arg("bias"), py::arg("mode") = "max",
          py::arg("use_bias") = true);
    m.def("rank_loss",
          [](const std::optional<DoubleArray>& h, const std::optional<DoubleArray>& a,
             double tau) { return hud::rank_loss(to_sims(h, a), tau); },
          py::arg("holistic"), py::arg("atomistic"), py::arg("tau"));
    m.def("distribution_regularization",
          [](const DoubleArray& h, const DoubleArray& a, double tau) {
              return hud::distribution_regularization(to_sims(h, a), tau);
          },
          py::arg("holistic"), py::arg("atomistic"), py::arg("tau"));
    m.def("total_loss",
          [](const std::optional<DoubleArray>& h, const std::optional<DoubleArray>& a,
             double tau, double kappa) { return hud::total_loss(to_sims(h, a), tau, kappa); },
          py::arg("holistic"), py::arg("atomistic"), py::arg("tau"), py::arg("kappa"));

    m.def("pronoun_ratio",
          [](const std::vector<std::string>& lines, const std::vector<std::string>& pronouns) {
              return hud::pronoun_ratio(hud::corpus_from_lines(lines, pronouns));
          },
          py::arg("lines"), py::arg("pronouns") = std::vector<std::string>{"it", "them"},
          "Percentage of lines containing at least one pronoun token.");

    m.def("default_config", [] { return hud::serialize_config(hud::RunConfig{}); },
          "Canonical text form of the default configuration.");
    m.def("config_hash",
          [](const std::string& text) { return hud::config_hash(hud::parse_config_text(text)); },
          py::arg("config_text"));

    m.def("dataset_stats",
          [](const std::string& text, uint64_t seed) {
              hud::RunConfig cfg = hud::parse_config_text(text);
              cfg.seed = seed;
              hud::validate_config(cfg);
              hud::Dataset data = hud::generate_dataset(cfg, cfg.seed);
              hud::RngStream rng = hud::RngStream(cfg.seed).derive(hud::fnv1a64("stats", 5), 0);
              py::dict d;
              d["triplets"] = data.triplets.size();
              d["database"] = data.database.size();
              d["oracle_recall1"] = hud::oracle_recall_at_1(data);
              d["text_only_recall1"] = hud::text_only_recall_at_1(data, rng);
              d["pronoun_ratio"] = hud::pronoun_ratio(hud::corpus_from_dataset(data));
              return d;
          },
          py::arg("config_text"), py::arg("seed"),
          "Generate the synthetic benchmark and report its reference statistics.");

    m.def("run_training",
          [](const std::string& text) {
              hud::RunConfig cfg = hud::parse_config_text(text);
              hud::RunResult run = hud::train_run(cfg);
              py::dict d = record_to_dict(run.records.back());
              d["jsonl"] = run.jsonl;
              return d;
          },
          py::arg("config_text"),
          "Full training run from a config text; returns the final metrics record.");

    m.def("grad_check",
          [](const std::string& text) {
              hud::GradCheckReport report = hud::run_grad_check(hud::parse_config_text(text));
              py::dict d;
              d["max_rel_err"] = report.max_rel_err;
              d["pass"] = report.pass;
              d["checked"] = report.entries.size();
              d["worst"] = report.worst.name;
              return d;
          },
          py::arg("config_text"));
}
