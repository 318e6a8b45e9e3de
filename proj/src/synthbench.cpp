#include "hud/synthbench.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

namespace hud {

namespace {

uint64_t tag(const char* s) { return fnv1a64(s, std::char_traits<char>::length(s)); }

std::vector<int> sample_distinct(RngStream& rng, int count, int universe) {
    if (count > universe)
        throw std::runtime_error("synthbench: cannot draw " + std::to_string(count) +
                                 " distinct values from " + std::to_string(universe));
    std::vector<int> pool(universe);
    for (int i = 0; i < universe; ++i) pool[i] = i;
    // partial Fisher-Yates
    for (int i = 0; i < count; ++i) {
        int j = i + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(universe - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

}  // namespace

int object_vocab_id(const RunConfig& cfg, int object_index) {
    if (object_index < 0 || object_index >= cfg.n_objects)
        throw std::runtime_error("synthbench: object index out of range");
    return 3 + object_index;
}

int attribute_vocab_id(const RunConfig& cfg, int attribute_index) {
    if (attribute_index < 0 || attribute_index >= cfg.n_attributes)
        throw std::runtime_error("synthbench: attribute index out of range");
    return 3 + cfg.n_objects + attribute_index;
}

std::string vocab_word(const RunConfig& cfg, int id) {
    if (id == kPadId) return "<pad>";
    if (id == kPronounItId) return "it";
    if (id == kPronounThemId) return "them";
    if (id >= 3 && id < 3 + cfg.n_objects) return "obj" + std::to_string(id - 3);
    if (id >= 3 + cfg.n_objects && id < 3 + cfg.n_objects + cfg.n_attributes)
        return "attr" + std::to_string(id - 3 - cfg.n_objects);
    throw std::runtime_error("synthbench: vocab id " + std::to_string(id) + " out of range");
}

VideoTokens render_scene(const RunConfig& cfg, const LatentScene& scene) {
    int total = cfg.n_f * cfg.tokens_per_frame;
    std::vector<int> flat;
    flat.reserve(total);
    for (const auto& obj : scene.objects) {
        for (int p = 0; p < obj.token_count; ++p)
            flat.push_back(p % 2 == 0 ? attribute_vocab_id(cfg, obj.attribute_index)
                                      : object_vocab_id(cfg, obj.object_index));
    }
    if (static_cast<int>(flat.size()) != total)
        throw std::runtime_error("synthbench: scene token counts sum to " +
                                 std::to_string(flat.size()) + ", expected " +
                                 std::to_string(total));
    VideoTokens out;
    out.frames.resize(cfg.n_f);
    for (int f = 0; f < cfg.n_f; ++f)
        out.frames[f].assign(flat.begin() + static_cast<long>(f) * cfg.tokens_per_frame,
                             flat.begin() + static_cast<long>(f + 1) * cfg.tokens_per_frame);
    return out;
}

Triplet generate_triplet(RngStream& rng, const RunConfig& cfg) {
    int g = cfg.scene_objects;
    int total = cfg.n_f * cfg.tokens_per_frame;
    int subject_tokens = static_cast<int>(std::ceil(cfg.detail_fraction * total));
    if (subject_tokens < 1)
        throw std::runtime_error("generate_triplet: subject must occupy at least one token");
    if (g == 1) subject_tokens = total;
    if (total - subject_tokens < g - 1)
        throw std::runtime_error("generate_triplet: token budget too small for scene");
    if (cfg.n_attributes < g + 1)
        throw std::runtime_error("generate_triplet: need n_attributes > scene_objects");

    std::vector<int> objects = sample_distinct(rng, g, cfg.n_objects);
    std::vector<int> attrs = sample_distinct(rng, g + 1, cfg.n_attributes);
    int subject = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(g)));

    Triplet t;
    t.subject_index = subject;
    t.new_attribute = attrs[g];  // guaranteed outside the scene's attributes
    t.ambiguous = cfg.ambiguous;

    int rest = total - subject_tokens;
    int others = g - 1;
    t.reference.objects.resize(g);
    int other_slot = 0;
    for (int i = 0; i < g; ++i) {
        SceneObject obj;
        obj.object_index = objects[i];
        obj.attribute_index = attrs[i];
        if (i == subject) {
            obj.token_count = subject_tokens;
        } else {
            obj.token_count = rest / others + (other_slot < rest % others ? 1 : 0);
            ++other_slot;
        }
        t.reference.objects[i] = obj;
    }

    t.target = t.reference;
    t.target.objects[subject].attribute_index = t.new_attribute;

    t.reference_tokens = render_scene(cfg, t.reference);
    t.target_tokens = render_scene(cfg, t.target);

    t.text_tokens.assign(static_cast<size_t>(cfg.l_text), kPadId);
    t.text_tokens[0] = cfg.ambiguous
                           ? kPronounItId
                           : object_vocab_id(cfg, t.reference.objects[subject].object_index);
    t.text_tokens[1] = attribute_vocab_id(cfg, t.new_attribute);
    return t;
}

Dataset generate_dataset(const RunConfig& cfg, uint64_t seed) {
    validate_config(cfg);
    if (cfg.distractor_count > 0 && cfg.scene_objects < 2)
        throw std::runtime_error(
            "generate_dataset: distractors need at least two scene objects");
    Dataset ds;
    RngStream root(seed);
    ds.triplets.reserve(cfg.dataset_size);
    ds.database.reserve(cfg.dataset_size + cfg.distractor_count);
    for (int i = 0; i < cfg.dataset_size; ++i) {
        RngStream s = root.derive(tag("triplet"), static_cast<uint64_t>(i));
        Triplet t = generate_triplet(s, cfg);
        DatabaseEntry e;
        e.scene = t.target;
        e.tokens = t.target_tokens;
        e.source_triplet = -1;
        e.changed_object = t.subject_index;
        ds.database.push_back(std::move(e));
        ds.triplets.push_back(std::move(t));
    }
    int g = cfg.scene_objects;
    for (int j = 0; j < cfg.distractor_count; ++j) {
        int ti = j % cfg.dataset_size;
        const Triplet& t = ds.triplets[ti];
        int slot = (j / cfg.dataset_size) % (g - 1);
        // slot-th object that is not the subject
        int obj = slot >= t.subject_index ? slot + 1 : slot;
        DatabaseEntry e;
        e.scene = t.reference;
        e.scene.objects[obj].attribute_index = t.new_attribute;
        e.tokens = render_scene(cfg, e.scene);
        e.source_triplet = ti;
        e.changed_object = obj;
        ds.database.push_back(std::move(e));
    }
    return ds;
}

double oracle_recall_at_1(const Dataset& ds) {
    if (ds.triplets.empty()) throw std::runtime_error("oracle_recall_at_1: empty dataset");
    int hits = 0;
    for (size_t i = 0; i < ds.triplets.size(); ++i) {
        const LatentScene& expected = ds.triplets[i].target;
        int matches = 0;
        size_t found = 0;
        for (size_t j = 0; j < ds.database.size(); ++j) {
            if (ds.database[j].scene == expected) {
                ++matches;
                found = j;
            }
        }
        if (matches == 1 && found == i) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.triplets.size());
}

double text_only_recall_at_1(const Dataset& ds, RngStream& rng) {
    if (ds.triplets.empty())
        throw std::runtime_error("text_only_recall_at_1: empty dataset");
    int hits = 0;
    for (size_t i = 0; i < ds.triplets.size(); ++i) {
        const Triplet& t = ds.triplets[i];
        std::vector<size_t> group{i};
        for (size_t j = ds.triplets.size(); j < ds.database.size(); ++j)
            if (ds.database[j].source_triplet == static_cast<int>(i)) group.push_back(j);
        size_t pick;
        if (t.ambiguous) {
            pick = group[rng.uniform_int(group.size())];
        } else {
            pick = group[0];
            for (size_t j : group)
                if (ds.database[j].changed_object == t.subject_index) pick = j;
        }
        if (pick == i) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.triplets.size());
}

double pronoun_ratio(const Corpus& corpus) {
    if (corpus.texts.empty()) throw std::runtime_error("pronoun_ratio: empty corpus");
    int with = 0;
    for (const auto& text : corpus.texts) {
        for (int id : text) {
            if (corpus.pronoun_ids.count(id)) {
                ++with;
                break;
            }
        }
    }
    return 100.0 * static_cast<double>(with) / static_cast<double>(corpus.texts.size());
}

Corpus corpus_from_lines(const std::vector<std::string>& lines,
                         const std::vector<std::string>& pronouns) {
    Corpus corpus;
    std::map<std::string, int> vocab;
    auto to_lower = [](std::string s) {
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    auto id_of = [&vocab](const std::string& w) {
        return vocab.emplace(w, static_cast<int>(vocab.size())).first->second;
    };
    for (const auto& p : pronouns) corpus.pronoun_ids.insert(id_of(to_lower(p)));
    for (const auto& line : lines) {
        std::vector<int> ids;
        std::istringstream in(line);
        std::string word;
        while (in >> word) ids.push_back(id_of(to_lower(word)));
        corpus.texts.push_back(std::move(ids));
    }
    return corpus;
}

Corpus corpus_from_dataset(const Dataset& ds) {
    Corpus corpus;
    corpus.pronoun_ids = {kPronounItId, kPronounThemId};
    for (const auto& t : ds.triplets) corpus.texts.push_back(t.text_tokens);
    return corpus;
}

std::string render_text(const RunConfig& cfg, const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) {
        if (id == kPadId) continue;
        if (!out.empty()) out += ' ';
        out += vocab_word(cfg, id);
    }
    return out;
}

}  // namespace hud
