#pragma once

#include <string>
#include <unordered_map>

#include "hud/autograd.hpp"
#include "hud/parameter_store.hpp"

namespace hud {

/// Bridges a ParameterStore into one autodiff graph. Each named parameter
/// becomes a single leaf Var (shared across every use in the graph), and
/// flush() moves the accumulated leaf gradients back into the store.
class GraphParams {
  public:
    GraphParams(ParameterStore& store, bool with_grad)
        : store_(&store), with_grad_(with_grad) {}

    ad::Var get(const std::string& name) {
        auto it = vars_.find(name);
        if (it != vars_.end()) return it->second;
        const Tensor2D& v = store_->value(name);
        ad::Var var = with_grad_ ? ad::leaf(v) : ad::constant(v);
        vars_.emplace(name, var);
        return var;
    }

    /// Adds each leaf's gradient into the store. Call once after backward().
    void flush() {
        if (!with_grad_) return;
        for (auto& [name, var] : vars_) {
            const Tensor2D& g = var.node()->grad;
            if (g.rows == 0) continue;  // parameter unused by this graph
            Tensor2D& dst = store_->grad(name);
            for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += g.data[i];
        }
    }

    bool with_grad() const { return with_grad_; }
    ParameterStore& store() { return *store_; }

  private:
    ParameterStore* store_;
    bool with_grad_;
    std::unordered_map<std::string, ad::Var> vars_;
};

}  // namespace hud
