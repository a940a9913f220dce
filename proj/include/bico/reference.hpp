#pragma once

// Straight-line forward pass of the batch loss, independent of the tape and
// the SIMD kernels, evaluated in long double. Used as the loss oracle and by
// the finite-difference gradient check.

#include <span>

#include "bico/data_io.hpp"
#include "bico/objective.hpp"
#include "bico/params.hpp"

namespace bico {

long double reference_batch_loss(const ModelParams& params, const DataView& data, std::span<const BatchItem> batch,
                                 const LossConfig& loss);

}  // namespace bico
