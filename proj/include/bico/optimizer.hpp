#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bico/gradcheck.hpp"

namespace bico {

struct AdamWConfig {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    void validate() const;
};

struct OptimState {
    std::vector<std::vector<double>> m, v;
    std::uint64_t step = 0;
};

/// One AdamW update with decoupled weight decay and bias correction:
///   p <- p - lr * wd * p;  p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Throws NumericError (before touching anything) on a non-finite gradient.
void adamw_step(std::span<const ParamGroup> params, std::span<const ParamGroup> grads, OptimState& state,
                const AdamWConfig& config);

}  // namespace bico
