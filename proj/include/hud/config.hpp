#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hud {

/// Every knob of a run, model and data included. Parsed from a flat
/// `key = value` file; unknown keys are rejected. Defaults are the desk
/// configuration used throughout the test suite.
struct RunConfig {
    // model dimensions
    int n_f = 2;            // frames per video
    int l_queries = 4;      // learnable query rows per frame
    int d_a = 16;           // atomistic width
    int d_h = 8;            // holistic width
    int l_text = 6;         // text length after padding
    int u_samples = 3;      // probabilistic composition draws (U)
    double tau = 0.1;
    double kappa = 0.5;
    double ln_eps = 1e-5;
    bool separate_composer_qformer = false;
    bool freeze_embeddings = false;
    std::string similarity_mode = "max";  // "max" or "matched"

    // training
    int batch_size = 16;
    double learning_rate = 1e-3;
    int steps = 500;
    uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    int eval_interval = 0;  // 0 = evaluate once after the last step
    int eval_queries = 0;   // triplets scored per evaluation, 0 = all
    std::string eval_ks = "1,5,10,50";

    // ablation derivatives
    bool ablate_d1 = false;  // no probabilistic holistic rows (U = 0)
    bool ablate_d2 = false;  // holistic composition -> addition
    bool ablate_d3 = false;  // drop the holistic level
    bool ablate_d4 = false;  // no detail sampling
    bool ablate_d5 = false;  // atomistic composition -> addition
    bool ablate_d6 = false;  // drop the atomistic level
    bool ablate_d7 = false;  // no similarity bias
    bool ablate_d8 = false;  // kappa = 0
    bool ablate_d9 = false;  // drop the rank loss

    // synthetic data
    int vocab_size = 64;
    int n_objects = 20;
    int n_attributes = 20;
    int scene_objects = 3;     // G
    int tokens_per_frame = 10;
    double detail_fraction = 0.1;  // f
    bool ambiguous = true;
    int dataset_size = 2000;       // n
    int distractor_count = 200;    // n_db

    // io and misc
    std::string metrics_jsonl = "metrics.jsonl";
    std::string metrics_csv = "summary.csv";
    std::string checkpoint_path = "";
    bool metrics_wall_time = false;
    int dump_count = 8;
    std::string pronouns = "it,them";
    int grad_check_samples = 24;
    double grad_check_eps = 1e-5;

    int effective_u() const { return ablate_d1 ? 0 : u_samples; }
};

/// Parses `key = value` lines ('#' comments, blank lines allowed).
/// Throws naming the offending key/line on unknown keys, duplicates, or
/// malformed values.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

/// Sets one field from its textual form, with the same strict value
/// parsing as the file loader. Used by the sweep harness.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Canonical serialization: every key, sorted, full double precision.
/// parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& cfg);
void save_config_file(const RunConfig& cfg, const std::string& path);

/// FNV-1a over the canonical serialization, as a 16-hex-digit string.
std::string config_hash(const RunConfig& cfg);

/// Structural validation (dimension positivity, vocabulary capacity,
/// ablation-flag conflicts). Throws with a description on violation.
void validate_config(const RunConfig& cfg);

std::vector<int> parse_int_list(const std::string& csv);
std::vector<std::string> parse_word_list(const std::string& csv);

}  // namespace hud
