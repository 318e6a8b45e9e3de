#pragma once

#include "hud/autograd.hpp"
#include "hud/config.hpp"
#include "hud/tensor.hpp"

namespace hud {

enum class SimilarityMode { kMaxOverTarget, kMatchedIndex };

SimilarityMode similarity_mode_from(const std::string& name);

/// Pair of in-batch similarity matrices. A level removed by an ablation
/// leaves its matrix empty (rows == 0).
struct BatchSims {
    Tensor2D holistic;
    Tensor2D atomistic;
    bool has_holistic() const { return holistic.rows > 0; }
    bool has_atomistic() const { return atomistic.rows > 0; }
};

// ---- plain implementations (evaluation fast path; oracle-checked) ----

/// Token scores s_i for one composed/target pair: max_j <C_i, T_j> in max
/// mode, <C_i, T_i> in matched mode. Rows must be L2-normalized by the
/// caller; C and T must have the same shape.
Tensor2D token_scores(const Tensor2D& c, const Tensor2D& t, SimilarityMode mode);

/// Uncertainty-regularized weights: softmax over the scores plus the learned
/// bias (bias added after the softmax). `use_bias=false` drops the bias
/// (derivative D#7).
Tensor2D similarity_bias(const Tensor2D& scores, const Tensor2D& bias, bool use_bias);

/// Scalar similarity: sum_i weights_i * scores_i.
double hierarchical_similarity(const Tensor2D& c, const Tensor2D& t, const Tensor2D& bias,
                               SimilarityMode mode, bool use_bias);

/// Mean InfoNCE over the batch: -1/B sum_i log softmax_j((H+A)/tau) at j=i.
/// Levels absent from `sims` drop out of the sum.
double rank_loss(const BatchSims& sims, double tau);

/// Similarity-degree distribution of row i of `sims` at temperature tau;
/// target-side distributions read the transposed matrix.
Tensor2D similarity_degree_distribution(const Tensor2D& sims, int i, double tau,
                                        bool target_side);

/// Holistic<->atomistic consistency: 1/(2B) sum_i KL(s^A_t_i || s^H_c_i) +
/// KL(s^H_t_i || s^A_c_i). Requires both levels.
double distribution_regularization(const BatchSims& sims, double tau);

/// rank_loss + kappa * distribution_regularization (exactly this
/// composition). The regularizer is skipped when kappa == 0 or a level is
/// missing.
double total_loss(const BatchSims& sims, double tau, double kappa);

// ---- graph-building counterparts used by training ----

ad::Var token_scores_ad(const ad::Var& c_norm, const ad::Var& t_norm_t, SimilarityMode mode);
ad::Var hierarchical_similarity_ad(const ad::Var& c_norm, const ad::Var& t_norm_t,
                                   const ad::Var& bias, SimilarityMode mode, bool use_bias);
ad::Var rank_loss_ad(const ad::Var& h, const ad::Var& a, double tau);
ad::Var distribution_regularization_ad(const ad::Var& h, const ad::Var& a, double tau);

}  // namespace hud
