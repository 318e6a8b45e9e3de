#pragma once

#include "hud/config.hpp"
#include "hud/encoder.hpp"

namespace hud {

/// Gaussian over the holistic modification vector, both heads 1 x d_h.
/// sigma is the raw linear head output (a signed scale, not a stddev).
struct TextGaussian {
    ad::Var mu;
    ad::Var sigma;
};

/// mu head: linear -> sigmoid -> layer norm; sigma head: single linear.
/// Both consume cross-attention(modification -> reference) plus a residual
/// of the modification vector, with separate attention parameters per head.
TextGaussian modification_distribution(GraphParams& params, const ad::Var& f_m_h,
                                       const ad::Var& f_r_h, const RunConfig& cfg);

/// U reparametrized draws, row u = sigma * noise_u + mu. `noise` is U x d_h,
/// drawn by the caller so runs with frozen noise are reproducible.
ad::Var sample_modification(const TextGaussian& g, const Tensor2D& noise);

/// Mixing weights for one (reference, text) pair: MLP over the 2*d_h
/// concatenation, logistic sigmoid on the output, shape 1 x 2*d_h.
ad::Var composition_weights(GraphParams& params, const ad::Var& f_r_h,
                            const ad::Var& text_vec);

/// w_alpha * text + w_beta * ref with (w_alpha, w_beta) the two halves of
/// the weight row.
ad::Var compose_pair(const ad::Var& weights, const ad::Var& text_vec, const ad::Var& f_r_h);

/// Holistic composed query, (1 + U) x d_h: row 0 composes the original
/// modification vector, rows 1..U compose the probabilistic draws.
/// `additive` swaps the learned composition for plain addition (derivative
/// D#2).
ad::Var build_holistic_composed(GraphParams& params, const ad::Var& f_r_h,
                                const ad::Var& f_m_h, const ad::Var& samples,
                                bool additive);

}  // namespace hud
