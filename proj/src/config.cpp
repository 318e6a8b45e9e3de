#include "hud/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hud/rng.hpp"

namespace hud {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Field {
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

void set_int(int& dst, const std::string& key, const std::string& v) {
    size_t pos = 0;
    long long parsed;
    try {
        parsed = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "': not an integer: '" + v + "'");
    }
    if (pos != v.size())
        throw std::runtime_error("config: key '" + key + "': trailing junk in '" + v + "'");
    dst = static_cast<int>(parsed);
}

void set_u64(uint64_t& dst, const std::string& key, const std::string& v) {
    size_t pos = 0;
    unsigned long long parsed;
    try {
        parsed = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "': not an integer: '" + v + "'");
    }
    if (pos != v.size())
        throw std::runtime_error("config: key '" + key + "': trailing junk in '" + v + "'");
    dst = parsed;
}

void set_double(double& dst, const std::string& key, const std::string& v) {
    size_t pos = 0;
    double parsed;
    try {
        parsed = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "': not a number: '" + v + "'");
    }
    if (pos != v.size())
        throw std::runtime_error("config: key '" + key + "': trailing junk in '" + v + "'");
    dst = parsed;
}

void set_bool(bool& dst, const std::string& key, const std::string& v) {
    if (v == "true")
        dst = true;
    else if (v == "false")
        dst = false;
    else
        throw std::runtime_error("config: key '" + key + "': expected true/false, got '" + v +
                                 "'");
}

// One registry drives parsing, serialization, and hashing, so the three can
// never drift apart.
std::map<std::string, Field> make_registry() {
    std::map<std::string, Field> reg;
    auto add_int = [&reg](const std::string& key, int RunConfig::*member) {
        reg[key] = {[member](const RunConfig& c) { return std::to_string(c.*member); },
                    [member, key](RunConfig& c, const std::string& v) {
                        set_int(c.*member, key, v);
                    }};
    };
    auto add_u64 = [&reg](const std::string& key, uint64_t RunConfig::*member) {
        reg[key] = {[member](const RunConfig& c) { return std::to_string(c.*member); },
                    [member, key](RunConfig& c, const std::string& v) {
                        set_u64(c.*member, key, v);
                    }};
    };
    auto add_double = [&reg](const std::string& key, double RunConfig::*member) {
        reg[key] = {[member](const RunConfig& c) { return format_double(c.*member); },
                    [member, key](RunConfig& c, const std::string& v) {
                        set_double(c.*member, key, v);
                    }};
    };
    auto add_bool = [&reg](const std::string& key, bool RunConfig::*member) {
        reg[key] = {[member](const RunConfig& c) { return c.*member ? "true" : "false"; },
                    [member, key](RunConfig& c, const std::string& v) {
                        set_bool(c.*member, key, v);
                    }};
    };
    auto add_string = [&reg](const std::string& key, std::string RunConfig::*member) {
        reg[key] = {[member](const RunConfig& c) { return c.*member; },
                    [member](RunConfig& c, const std::string& v) { c.*member = v; }};
    };

    add_int("n_f", &RunConfig::n_f);
    add_int("l_queries", &RunConfig::l_queries);
    add_int("d_a", &RunConfig::d_a);
    add_int("d_h", &RunConfig::d_h);
    add_int("l_text", &RunConfig::l_text);
    add_int("u_samples", &RunConfig::u_samples);
    add_double("tau", &RunConfig::tau);
    add_double("kappa", &RunConfig::kappa);
    add_double("ln_eps", &RunConfig::ln_eps);
    add_bool("separate_composer_qformer", &RunConfig::separate_composer_qformer);
    add_bool("freeze_embeddings", &RunConfig::freeze_embeddings);
    add_string("similarity_mode", &RunConfig::similarity_mode);
    add_int("batch_size", &RunConfig::batch_size);
    add_double("learning_rate", &RunConfig::learning_rate);
    add_int("steps", &RunConfig::steps);
    add_u64("seed", &RunConfig::seed);
    add_double("adam_beta1", &RunConfig::adam_beta1);
    add_double("adam_beta2", &RunConfig::adam_beta2);
    add_double("adam_eps", &RunConfig::adam_eps);
    add_double("weight_decay", &RunConfig::weight_decay);
    add_int("eval_interval", &RunConfig::eval_interval);
    add_int("eval_queries", &RunConfig::eval_queries);
    add_string("eval_ks", &RunConfig::eval_ks);
    add_bool("ablate_d1", &RunConfig::ablate_d1);
    add_bool("ablate_d2", &RunConfig::ablate_d2);
    add_bool("ablate_d3", &RunConfig::ablate_d3);
    add_bool("ablate_d4", &RunConfig::ablate_d4);
    add_bool("ablate_d5", &RunConfig::ablate_d5);
    add_bool("ablate_d6", &RunConfig::ablate_d6);
    add_bool("ablate_d7", &RunConfig::ablate_d7);
    add_bool("ablate_d8", &RunConfig::ablate_d8);
    add_bool("ablate_d9", &RunConfig::ablate_d9);
    add_int("vocab_size", &RunConfig::vocab_size);
    add_int("n_objects", &RunConfig::n_objects);
    add_int("n_attributes", &RunConfig::n_attributes);
    add_int("scene_objects", &RunConfig::scene_objects);
    add_int("tokens_per_frame", &RunConfig::tokens_per_frame);
    add_double("detail_fraction", &RunConfig::detail_fraction);
    add_bool("ambiguous", &RunConfig::ambiguous);
    add_int("dataset_size", &RunConfig::dataset_size);
    add_int("distractor_count", &RunConfig::distractor_count);
    add_string("metrics_jsonl", &RunConfig::metrics_jsonl);
    add_string("metrics_csv", &RunConfig::metrics_csv);
    add_string("checkpoint_path", &RunConfig::checkpoint_path);
    add_bool("metrics_wall_time", &RunConfig::metrics_wall_time);
    add_int("dump_count", &RunConfig::dump_count);
    add_string("pronouns", &RunConfig::pronouns);
    add_int("grad_check_samples", &RunConfig::grad_check_samples);
    add_double("grad_check_eps", &RunConfig::grad_check_eps);
    return reg;
}

const std::map<std::string, Field>& registry() {
    static const std::map<std::string, Field> reg = make_registry();
    return reg;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    const auto& reg = registry();
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     ": expected 'key = value', got '" + s + "'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        auto it = reg.find(key);
        if (it == reg.end())
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     ": unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     ": duplicate key '" + key + "'");
        it->second.set(cfg, value);
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& reg = registry();
    auto it = reg.find(key);
    if (it == reg.end()) throw std::runtime_error("config: unknown key '" + key + "'");
    it->second.set(cfg, value);
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, field] : registry())
        out += key + " = " + field.get(cfg) + "\n";
    return out;
}

void save_config_file(const RunConfig& cfg, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("config: cannot write '" + path + "'");
    f << serialize_config(cfg);
}

std::string config_hash(const RunConfig& cfg) {
    std::string canon = serialize_config(cfg);
    uint64_t h = fnv1a64(canon.data(), canon.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void validate_config(const RunConfig& cfg) {
    auto fail = [](const std::string& msg) { throw std::runtime_error("config: " + msg); };
    if (cfg.n_f < 1) fail("n_f must be >= 1");
    if (cfg.l_queries < 1) fail("l_queries must be >= 1");
    if (cfg.d_a < 2 || cfg.d_h < 2) fail("d_a and d_h must be >= 2");
    if (cfg.l_text < 2) fail("l_text must be >= 2 (subject + attribute)");
    if (cfg.u_samples < 0) fail("u_samples must be >= 0");
    if (cfg.tau <= 0.0) fail("tau must be positive");
    if (cfg.kappa < 0.0) fail("kappa must be >= 0");
    if (cfg.ln_eps < 0.0) fail("ln_eps must be >= 0");
    if (cfg.similarity_mode != "max" && cfg.similarity_mode != "matched")
        fail("similarity_mode must be 'max' or 'matched'");
    if (cfg.batch_size < 2) fail("batch_size must be >= 2 for in-batch ranking");
    if (cfg.steps < 0) fail("steps must be >= 0");
    if (cfg.learning_rate <= 0.0) fail("learning_rate must be positive");
    if (cfg.eval_interval < 0) fail("eval_interval must be >= 0");
    if (cfg.eval_queries < 0) fail("eval_queries must be >= 0");
    if (cfg.vocab_size < 3 + cfg.n_objects + cfg.n_attributes)
        fail("vocab_size too small: need 3 + n_objects + n_attributes = " +
             std::to_string(3 + cfg.n_objects + cfg.n_attributes));
    if (cfg.scene_objects < 1) fail("scene_objects must be >= 1");
    if (cfg.scene_objects > cfg.n_objects) fail("scene_objects exceeds n_objects");
    if (cfg.n_attributes < 2) fail("n_attributes must be >= 2 (attribute must change)");
    if (cfg.tokens_per_frame < 1) fail("tokens_per_frame must be >= 1");
    if (cfg.detail_fraction <= 0.0 || cfg.detail_fraction > 1.0)
        fail("detail_fraction must lie in (0, 1]");
    int total = cfg.n_f * cfg.tokens_per_frame;
    int subject_tokens = static_cast<int>(std::ceil(cfg.detail_fraction * total));
    if (subject_tokens < 1) fail("detail_fraction * total tokens < 1");
    if (total - subject_tokens < cfg.scene_objects - 1)
        fail("token budget cannot host " + std::to_string(cfg.scene_objects - 1) +
             " non-subject objects");
    if (cfg.dataset_size < 1) fail("dataset_size must be >= 1");
    if (cfg.distractor_count < 0) fail("distractor_count must be >= 0");
    if (cfg.ablate_d3 && cfg.ablate_d6) fail("ablations d3 and d6 together leave no level");
    if (cfg.ablate_d8 && cfg.ablate_d9) fail("ablations d8 and d9 together zero the loss");
    if (cfg.ablate_d9 && cfg.kappa == 0.0) fail("ablation d9 with kappa = 0 zeroes the loss");
    if (cfg.ablate_d9 && (cfg.ablate_d3 || cfg.ablate_d6))
        fail("ablation d9 keeps only the consistency term, which needs both levels");
    if (cfg.ablate_d3 && (cfg.ablate_d1 || cfg.ablate_d2))
        fail("ablations d1/d2 modify the holistic level removed by d3");
    if (cfg.ablate_d6 && (cfg.ablate_d4 || cfg.ablate_d5))
        fail("ablations d4/d5 modify the atomistic level removed by d6");
    if (cfg.grad_check_samples < 1) fail("grad_check_samples must be >= 1");
    if (cfg.grad_check_eps <= 0.0) fail("grad_check_eps must be positive");
    for (int k : parse_int_list(cfg.eval_ks))
        if (k < 1) fail("eval_ks entries must be >= 1");
    if (parse_word_list(cfg.pronouns).empty()) fail("pronouns list is empty");
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::string cur;
    std::istringstream in(csv);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (cur.empty()) continue;
        int v;
        set_int(v, "list", cur);
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> parse_word_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(csv);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

}  // namespace hud
