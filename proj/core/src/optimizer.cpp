#include "asd/optimizer.hpp"

#include <cmath>

namespace asd {

void Adam::step(ParameterStore& params, const GradMap& grads) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;  // unreached parameter, no update
        const Tensor& g = git->second;
        if (!g.same_shape(p))
            throw ShapeError("gradient shape " + g.shape_str() + " mismatches parameter '" +
                             name + "' " + p.shape_str());
        Tensor& m = m_.try_emplace(name, Tensor(p.shape())).first->second;
        Tensor& v = v_.try_emplace(name, Tensor(p.shape())).first->second;
        for (size_t i = 0; i < p.numel(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace asd
