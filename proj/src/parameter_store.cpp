#include "hud/parameter_store.hpp"

#include <algorithm>
#include <cmath>

namespace hud {

Tensor2D& ParameterStore::create(const std::string& name, int rows, int cols) {
    if (entries_.count(name))
        throw std::runtime_error("parameter_store: duplicate parameter '" + name + "'");
    Entry e;
    e.value = Tensor2D::zeros(rows, cols);
    e.grad = Tensor2D::zeros(rows, cols);
    e.m = Tensor2D::zeros(rows, cols);
    e.v = Tensor2D::zeros(rows, cols);
    auto [it, ok] = entries_.emplace(name, std::move(e));
    (void)ok;
    return it->second.value;
}

ParameterStore::Entry& ParameterStore::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw std::runtime_error("parameter_store: unknown parameter '" + name + "'");
    return it->second;
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw std::runtime_error("parameter_store: unknown parameter '" + name + "'");
    return it->second;
}

void ParameterStore::zero_grad() {
    for (auto& [name, e] : entries_)
        std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

std::vector<std::string> ParameterStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

size_t ParameterStore::scalar_count() const {
    size_t n = 0;
    for (const auto& [name, e] : entries_) n += e.value.size();
    return n;
}

void adam_step(ParameterStore& store, const AdamConfig& cfg,
               const std::vector<std::string>& frozen) {
    uint64_t t = store.step + 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (auto& [name, e] : store.entries()) {
        if (std::find(frozen.begin(), frozen.end(), name) != frozen.end()) continue;
        for (size_t i = 0; i < e.value.size(); ++i) {
            double g = e.grad.data[i];
            if (!std::isfinite(g))
                throw std::runtime_error("adam_step: non-finite gradient in '" + name + "'");
            e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * g;
            e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * g * g;
            double mhat = e.m.data[i] / bc1;
            double vhat = e.v.data[i] / bc2;
            double upd = mhat / (std::sqrt(vhat) + cfg.eps);
            if (cfg.weight_decay != 0.0) upd += cfg.weight_decay * e.value.data[i];
            e.value.data[i] -= cfg.lr * upd;
        }
    }
    store.step = t;
}

}  // namespace hud
