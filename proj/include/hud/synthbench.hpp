#pragma once

#include <set>
#include <string>
#include <vector>

#include "hud/config.hpp"
#include "hud/rng.hpp"

namespace hud {

// Vocabulary layout: 0 = padding, 1 = "it", 2 = "them", then object symbols,
// then attribute symbols. Remaining ids up to vocab_size are unused.
constexpr int kPadId = 0;
constexpr int kPronounItId = 1;
constexpr int kPronounThemId = 2;

int object_vocab_id(const RunConfig& cfg, int object_index);
int attribute_vocab_id(const RunConfig& cfg, int attribute_index);
std::string vocab_word(const RunConfig& cfg, int id);

struct SceneObject {
    int object_index = 0;     // 0 .. n_objects-1
    int attribute_index = 0;  // 0 .. n_attributes-1
    int token_count = 0;
    bool operator==(const SceneObject&) const = default;
};

/// Object list in layout order; token counts sum to n_f * tokens_per_frame.
struct LatentScene {
    std::vector<SceneObject> objects;
    bool operator==(const LatentScene&) const = default;
};

struct VideoTokens {
    std::vector<std::vector<int>> frames;  // n_f frames of tokens_per_frame ids
};

struct Triplet {
    LatentScene reference;
    LatentScene target;
    int subject_index = 0;    // position in reference.objects
    int new_attribute = 0;    // attribute index after the change
    bool ambiguous = false;
    VideoTokens reference_tokens;
    VideoTokens target_tokens;
    std::vector<int> text_tokens;  // padded to l_text
};

struct DatabaseEntry {
    LatentScene scene;
    VideoTokens tokens;
    int source_triplet = -1;  // -1 for true targets (index equals triplet id)
    int changed_object = -1;  // object slot the entry perturbs
};

struct Dataset {
    std::vector<Triplet> triplets;
    /// True targets first (entry i belongs to triplet i), distractors after.
    std::vector<DatabaseEntry> database;
};

/// Tokens for a scene: per object, an attr/object alternating run (attribute
/// first, alternation continued across frame boundaries), runs concatenated
/// in layout order and chopped into n_f frames.
VideoTokens render_scene(const RunConfig& cfg, const LatentScene& scene);

/// One triplet from the latent factors drawn off `rng`: G distinct objects
/// with distinct attributes, a uniformly chosen subject holding
/// ceil(f * total) tokens, and a new attribute outside the scene's set.
/// The text names the subject explicitly or by pronoun (ambiguous mode).
Triplet generate_triplet(RngStream& rng, const RunConfig& cfg);

/// n triplets plus distractor_count near-miss database entries. Distractor
/// j perturbs triplet (j mod n), applying that triplet's new attribute to
/// non-subject slot ((j div n) mod (G-1)).
Dataset generate_dataset(const RunConfig& cfg, uint64_t seed);

/// Solves every triplet from full latent information: reconstructs the exact
/// target scene and requires it to be the unique database match at rank 1.
double oracle_recall_at_1(const Dataset& ds);

/// Reference-blind baseline: among a triplet's own database group (true
/// target + its near-miss variants), picks the text-consistent candidate;
/// ambiguous texts leave a G-way tie broken uniformly at random.
double text_only_recall_at_1(const Dataset& ds, RngStream& rng);

struct Corpus {
    std::vector<std::vector<int>> texts;  // token-id sequences
    std::set<int> pronoun_ids;
};

/// Percentage of texts containing at least one pronoun token (a text with
/// several pronouns counts once). Errors on an empty corpus.
double pronoun_ratio(const Corpus& corpus);

/// Whitespace tokenization with case-insensitive pronoun matching; each
/// line is one text.
Corpus corpus_from_lines(const std::vector<std::string>& lines,
                         const std::vector<std::string>& pronouns);

/// Modification texts of a dataset as a Corpus (pronoun ids {it, them}).
Corpus corpus_from_dataset(const Dataset& ds);

/// Renders a modification token sequence to words, skipping padding.
std::string render_text(const RunConfig& cfg, const std::vector<int>& ids);

}  // namespace hud
