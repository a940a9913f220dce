#include "bico/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bico/common.hpp"

namespace bico {

void AdamWConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("adamw: learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("adamw: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("adamw: eps must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("adamw: weight decay must be non-negative");
}

void adamw_step(std::span<const ParamGroup> params, std::span<const ParamGroup> grads, OptimState& state,
                const AdamWConfig& config) {
    config.validate();
    if (params.size() != grads.size()) throw std::invalid_argument("adamw: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].values.size() != grads[i].values.size()) {
            throw std::invalid_argument("adamw: shape mismatch in '" + params[i].name + "'");
        }
        for (std::size_t k = 0; k < grads[i].values.size(); ++k) {
            if (!std::isfinite(grads[i].values[k])) {
                throw NumericError("adamw: non-finite gradient in '" + params[i].name + "' at index " +
                                   std::to_string(k));
            }
        }
    }
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.values.size(), 0.0);
            state.v.emplace_back(p.values.size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adamw: state does not match the parameters");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    const double decay = 1.0 - config.lr * config.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != params[i].values.size()) throw std::invalid_argument("adamw: state shape mismatch");
        const auto g = grads[i].values;
        auto p = params[i].values;
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
            p[k] *= decay;
            p[k] -= config.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config.eps);
        }
    }
}

}  // namespace bico
