#pragma once

#include "asd/params.hpp"
#include "asd/tape.hpp"

namespace asd {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment optimizer with bias correction. Moment accumulators are
// keyed by parameter name and must match parameter shapes; the step counter
// is strictly increasing. Deterministic given its state.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ParameterStore& params, const GradMap& grads);

    long step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::map<std::string, Tensor> m_;
    std::map<std::string, Tensor> v_;
    long step_ = 0;
};

}  // namespace asd
