#include "hud/gradcheck.hpp"

#include <cmath>
#include <cstdlib>

namespace hud {

GradCheckReport grad_check(
    const std::function<double(ParameterStore&, bool)>& loss_fn, ParameterStore& store,
    double eps, int samples_per_param, double tolerance) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");
    if (samples_per_param < 1)
        throw std::invalid_argument("grad_check: need at least one sample per parameter");

    double l0 = loss_fn(store, false);
    double l1 = loss_fn(store, false);
    if (l0 != l1)
        throw std::runtime_error("grad_check: loss is not deterministic under frozen RNG");
    if (!std::isfinite(l0)) throw std::runtime_error("grad_check: non-finite loss");

    store.zero_grad();
    loss_fn(store, true);

    GradCheckReport report;
    for (const auto& name : store.names()) {
        auto& e = store.entry(name);
        int n = static_cast<int>(e.value.size());

        // Deterministic coordinate selection: argmax-|analytic| first, then
        // an even stride across the remaining coordinates.
        std::vector<int> coords;
        int best = 0;
        for (int i = 1; i < n; ++i)
            if (std::abs(e.grad.data[i]) > std::abs(e.grad.data[best])) best = i;
        coords.push_back(best);
        int extra = std::min(samples_per_param - 1, n - 1);
        for (int k = 0; k < extra; ++k) {
            int idx = static_cast<int>(static_cast<long long>(k) * n / extra);
            if (idx >= n) idx = n - 1;
            if (idx != best) coords.push_back(idx);
        }

        for (int idx : coords) {
            double saved = e.value.data[idx];
            e.value.data[idx] = saved + eps;
            double lp = loss_fn(store, false);
            e.value.data[idx] = saved - eps;
            double lm = loss_fn(store, false);
            e.value.data[idx] = saved;

            GradCheckEntry ge;
            ge.name = name;
            ge.index = idx;
            ge.analytic = e.grad.data[idx];
            ge.numeric = (lp - lm) / (2.0 * eps);
            ge.rel_err = std::abs(ge.analytic - ge.numeric) /
                         std::max(1.0, std::abs(ge.numeric));
            if (ge.rel_err > report.max_rel_err) {
                report.max_rel_err = ge.rel_err;
                report.worst = ge;
            }
            report.entries.push_back(ge);
        }
    }
    report.pass = report.max_rel_err <= tolerance;
    return report;
}

}  // namespace hud
