#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hud/parameter_store.hpp"

namespace hud {

struct GradCheckEntry {
    std::string name;
    int index = 0;          // flat coordinate within the parameter
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = false;
    std::vector<GradCheckEntry> entries;
    GradCheckEntry worst;
};

/// Central-difference verification of the analytic gradients produced by
/// `loss_fn`. The callable must populate store gradients when asked
/// (with_grad=true) and return the scalar loss either way, evaluating the
/// same deterministic function every call (frozen noise).
///
/// Coordinates are sampled per parameter: the largest-|analytic| coordinate
/// plus up to `samples_per_param - 1` deterministically spread extras.
/// rel_err = |analytic - numeric| / max(1, |numeric|).
GradCheckReport grad_check(
    const std::function<double(ParameterStore&, bool /*with_grad*/)>& loss_fn,
    ParameterStore& store, double eps, int samples_per_param = 24,
    double tolerance = 1e-4);

}  // namespace hud
