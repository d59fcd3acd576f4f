#pragma once

#include <functional>
#include <string>

#include "asd/params.hpp"
#include "asd/tape.hpp"

namespace asd {

// Scalar loss over a parameter store. When `grads` is non-null the callee
// must run its backward pass and fill it; otherwise a plain forward value
// is enough. The function must be deterministic in the parameter values.
using LossFn = std::function<double(ParameterStore&, GradMap*)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    size_t coordinates = 0;
};

// Central-difference oracle: perturbs every parameter coordinate by +/- eps,
// compares (f+ - f-) / 2 eps against the reverse-mode gradient, and reports
// the worst relative error |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
GradCheckReport finite_diff_check(const LossFn& f, ParameterStore& params, double eps = 1e-5);

}  // namespace asd
