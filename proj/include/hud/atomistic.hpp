#pragma once

#include "hud/config.hpp"
#include "hud/encoder.hpp"

namespace hud {

/// Per-token Gaussian over the reference tokens, both heads
/// (n_f * l_queries) x d_a. Head architecture mirrors the holistic heads.
struct TokenGaussian {
    ad::Var mu;
    ad::Var sigma;
};

/// Token-level distribution: each reference token attends to the encoded
/// modification text (separate mu/sigma attention parameters), with a
/// residual of the reference tokens feeding both heads.
TokenGaussian reference_distribution(GraphParams& params, const ad::Var& f_r_a,
                                     const ad::Var& f_m_a, const RunConfig& cfg);

/// One reparametrized draw per token row; `noise` matches mu's shape.
ad::Var sample_detail_tokens(const TokenGaussian& g, const Tensor2D& noise);

/// Fine-grained interaction of the sampled detail tokens with the raw
/// modification symbol embeddings. `additive` (derivative D#5) replaces the
/// block with queries + mean(text embedding) broadcast.
ad::Var compose_atomistic_uncertain(GraphParams& params, const ad::Var& detail,
                                    const ad::Var& text_embeds, const RunConfig& cfg,
                                    bool additive);

/// Atomistic composed query, (n_f * 2 * l_queries) x d_h: the original-token
/// interaction block concatenated with the detail block, then the shared
/// row-wise projection to d_h.
ad::Var build_atomistic_composed(GraphParams& params, const ad::Var& f_r_a,
                                 const ad::Var& detail_composed, const ad::Var& text_embeds,
                                 const RunConfig& cfg, bool additive);

/// The shared row-wise d_a -> d_h projection (also used for target tokens).
ad::Var project_tokens(GraphParams& params, const ad::Var& tokens);

}  // namespace hud
