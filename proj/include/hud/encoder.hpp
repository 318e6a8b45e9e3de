#pragma once

#include <string>
#include <vector>

#include "hud/config.hpp"
#include "hud/graph_params.hpp"

namespace hud {

/// Single-head scaled-dot-product attention with learned q/k/v projections
/// (weight-only). `prefix` names the projection parameters:
/// {prefix}.wq, {prefix}.wk, {prefix}.wv.
ad::Var cross_attention(GraphParams& params, const std::string& prefix, const ad::Var& q,
                        const ad::Var& k, const ad::Var& v);

/// One extraction block: residual self-attention over the queries, residual
/// cross-attention to the context, residual position-wise MLP, layer norm
/// after each residual. `self_attention=false` skips the first stage (used
/// by equivariance tests).
ad::Var qformer_block(GraphParams& params, const std::string& prefix, const ad::Var& queries,
                      const ad::Var& context, double ln_eps, bool self_attention = true);

/// Column-mean over token rows followed by the learned pool projection
/// (d_a -> d_h), yielding the 1 x d_h holistic vector.
ad::Var pool_project(GraphParams& params, const ad::Var& tokens);

struct EncoderOutput {
    ad::Var atomistic;  // (n_f * l_queries) x d_a for video, l_text x d_a for text
    ad::Var holistic;   // 1 x d_h
};

/// Embeds one frame's symbols and extracts l_queries rows per frame with the
/// shared block; frames concatenate along the token axis.
EncoderOutput encode_video(GraphParams& params, const std::vector<std::vector<int>>& frames,
                           const RunConfig& cfg);

/// Text path: the embedded sequence attends to itself (sequence as queries).
EncoderOutput encode_text(GraphParams& params, const std::vector<int>& ids,
                          const RunConfig& cfg);

/// Raw symbol embedding rows for a token sequence (no block pass).
ad::Var embed_tokens(GraphParams& params, const std::vector<int>& ids);

/// Registers every model parameter for this config with deterministic
/// per-name initialization streams derived from `seed`.
ParameterStore init_params(const RunConfig& cfg, uint64_t seed);

/// Names of parameters excluded from optimizer updates under this config.
std::vector<std::string> frozen_params(const RunConfig& cfg);

}  // namespace hud
