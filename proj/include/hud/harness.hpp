#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hud/checkpoint.hpp"
#include "hud/gradcheck.hpp"
#include "hud/model.hpp"
#include "hud/synthbench.hpp"

namespace hud {

/// One evaluation point of a run. wall_time_ms is always measured but only
/// serialized when the config opts in, since it breaks byte-for-byte
/// reproducibility of the metrics stream.
struct MetricsRecord {
    uint64_t step = 0;
    double loss = 0.0;
    double loss_rank = 0.0;
    double loss_kl = 0.0;
    std::map<int, double> recall;  // k -> R@k
    double wall_time_ms = 0.0;
    std::string config_hash;
};

/// One JSON object per record, keys sorted, no trailing newline.
std::string metrics_json_line(const MetricsRecord& rec, bool with_wall_time);

/// Ordered (column, value) pairs behind every tabular writer, exposed so
/// callers can prepend their own key columns (derivative name, sweep value).
std::vector<std::pair<std::string, std::string>> metrics_columns(const MetricsRecord& rec,
                                                                 bool with_wall_time);

/// Header plus one row per record; columns mirror the JSONL fields.
std::string metrics_csv_table(const std::vector<MetricsRecord>& records,
                              bool with_wall_time);

/// A training step produced a non-finite loss. `jsonl` holds the metrics
/// stream up to and including the diagnostic record, so callers can still
/// persist what happened.
struct TrainingDiverged : std::runtime_error {
    TrainingDiverged(const std::string& what, std::string stream)
        : std::runtime_error(what), jsonl(std::move(stream)) {}
    std::string jsonl;
};

struct RunResult {
    Model model;
    std::vector<MetricsRecord> records;
    std::string jsonl;  // newline-terminated record lines
    std::string csv;
};

/// Recall@k over `queries`, where query i's true target is database entry i.
/// Every query is scored against every entry; rank ties resolve to the lower
/// database index. Throws on an empty database/query list or k > database.
std::map<int, double> evaluate_recall(const Model& model, const std::vector<Triplet>& queries,
                                      const std::vector<DatabaseEntry>& database,
                                      const std::vector<int>& ks);

/// Dataset-level wrapper: queries are the first `query_limit` triplets
/// (0 = all), ranked against their true targets plus every distractor.
std::map<int, double> evaluate_dataset(const Model& model, const Dataset& data,
                                       int query_limit, const std::vector<int>& ks);

/// Full training run driven by cfg.seed: Adam on the batch loss, one record
/// per evaluation point (multiples of eval_interval, plus the final step;
/// steps = 0 records the untrained model once). The caller's dataset must
/// match the config's data fields.
RunResult train_run(const RunConfig& cfg, const Dataset& data);

/// Convenience overload generating the dataset from (cfg, cfg.seed).
RunResult train_run(const RunConfig& cfg);

/// Names accepted by derivative_config: "full", "d1" .. "d9".
const std::vector<std::string>& ablation_names();

/// Copy of `cfg` with the named derivative's flag set ("full" = unchanged).
/// Validates the result, so conflicting presets are rejected here.
RunConfig derivative_config(const RunConfig& cfg, const std::string& name);

/// train_run under the named derivative (dataset regenerated internally;
/// derivative flags never affect data generation).
RunResult run_ablation(const RunConfig& cfg, const std::string& name);

struct SweepRow {
    std::string value;     // textual form of the swept key's value
    MetricsRecord final_record;
};

/// One full run per value of `key` at the shared seed, dataset regenerated
/// per value (the key may be a data field). Returns the final record of
/// each run; `csv` (optional) receives a value -> metrics table.
std::vector<SweepRow> sweep(const RunConfig& cfg, const std::string& key,
                            const std::vector<std::string>& values, std::string* csv);

/// Full-objective gradient verification on a fixed batch with frozen noise:
/// the analytic gradient of every parameter against central differences,
/// using cfg.grad_check_{samples,eps}. The batch is the first batch_size
/// triplets of a minimal dataset generated from cfg.
GradCheckReport run_grad_check(const RunConfig& cfg);

/// Tab-delimited embedding export for the first `count` triplets: seven
/// labeled categories (reference, target, modification, textual
/// probabilistic, original composition, probabilistic composition, visual
/// detail), every row projected to width d_h. Categories whose pipeline an
/// ablation removes are skipped.
void dump_embeddings(const Model& model, const Dataset& data, int count,
                     const std::string& path);

}  // namespace hud
