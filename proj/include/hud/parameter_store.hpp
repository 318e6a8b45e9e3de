#pragma once

#include <map>
#include <string>
#include <vector>

#include "hud/rng.hpp"
#include "hud/tensor.hpp"

namespace hud {

/// Named parameter registry: value, gradient, and Adam moments per entry.
/// Iteration order is the sorted name order, which keeps optimizer updates
/// and serialization deterministic.
class ParameterStore {
  public:
    struct Entry {
        Tensor2D value;
        Tensor2D grad;
        Tensor2D m;
        Tensor2D v;
    };

    /// Registers a new parameter. Throws if the name already exists.
    Tensor2D& create(const std::string& name, int rows, int cols);
    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;
    Tensor2D& value(const std::string& name) { return entry(name).value; }
    Tensor2D& grad(const std::string& name) { return entry(name).grad; }

    void zero_grad();
    std::vector<std::string> names() const;
    size_t size() const { return entries_.size(); }
    size_t scalar_count() const;

    std::map<std::string, Entry>& entries() { return entries_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

    uint64_t step = 0;           // completed optimizer steps
    RngStream rng;               // training-time noise stream, checkpointed

  private:
    std::map<std::string, Entry> entries_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled
};

/// One bias-corrected Adam update over every parameter from its stored
/// gradient. Increments store.step. Entries named in `frozen` are skipped.
void adam_step(ParameterStore& store, const AdamConfig& cfg,
               const std::vector<std::string>& frozen = {});

}  // namespace hud
