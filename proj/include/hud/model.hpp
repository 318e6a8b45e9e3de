#pragma once

#include "hud/alignment.hpp"
#include "hud/atomistic.hpp"
#include "hud/config.hpp"
#include "hud/encoder.hpp"
#include "hud/holistic.hpp"
#include "hud/synthbench.hpp"

namespace hud {

/// Frozen per-item reparametrization noise for one batch.
struct BatchNoise {
    std::vector<Tensor2D> holistic;   // u_samples x d_h per item (may be 0 x d_h)
    std::vector<Tensor2D> atomistic;  // (n_f * l_queries) x d_a per item
};

BatchNoise draw_batch_noise(RngStream rng, const RunConfig& cfg, int batch);

struct LossBreakdown {
    double total = 0.0;
    double rank = 0.0;  // logged even when d9 drops it from the objective
    double kl = 0.0;    // logged even when the objective skips it; 0 if a level is missing
    BatchSims sims;
};

/// The full composed-retrieval model: parameters plus the forward graphs.
class Model {
  public:
    Model(const RunConfig& cfg, uint64_t seed);
    Model(const RunConfig& cfg, ParameterStore store);

    const RunConfig& config() const { return cfg_; }
    ParameterStore& params() { return store_; }
    const ParameterStore& params() const { return store_; }
    double effective_kappa() const { return cfg_.ablate_d8 ? 0.0 : cfg_.kappa; }

    /// Builds the batch loss graph; with_grad additionally runs backward and
    /// accumulates parameter gradients into the store (which is zeroed
    /// first).
    LossBreakdown batch_loss(const std::vector<const Triplet*>& batch,
                             const BatchNoise& noise, bool with_grad);

    /// Evaluation-side representations, rows L2-normalized.
    struct Composed {
        Tensor2D holistic;   // (1+U) x d_h, empty under d3
        Tensor2D atomistic;  // (n_f * 2 * l_queries) x d_h, empty under d6
    };
    Composed compose_query(const Triplet& t, int query_index) const;
    Composed extend_target(const VideoTokens& target) const;

    /// Combined similarity of a prepared query/target pair.
    double pair_score(const Composed& query, const Composed& target) const;

  private:
    struct ComposedVars {
        ad::Var h;
        ad::Var a;
    };
    ComposedVars compose_vars(GraphParams& p, const Triplet& t, const Tensor2D& noise_h,
                              const Tensor2D& noise_a) const;
    ComposedVars extend_vars(GraphParams& p, const VideoTokens& target) const;

    RunConfig cfg_;
    ParameterStore store_;
    SimilarityMode mode_;
};

}  // namespace hud
