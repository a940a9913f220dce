#pragma once

// Finite-difference check of the full training loss on a tiny synthetic batch.

#include <cstdint>

#include "bico/gradcheck.hpp"
#include "bico/model.hpp"

namespace bico {

struct GradCheckProblem {
    Subtask subtask = Subtask::Ideology;
    std::size_t dim = 8;
    std::size_t hidden = 16;
    std::size_t batch = 8;
    std::uint64_t seed = 11;
};

/// Builds synthetic data and a randomly initialized model (adapter and every
/// block perturbed away from its initializer), draws a batch that exercises
/// the contrastive term, and compares backprop with central differences.
GradCheckReport check_loss_gradients(const GradCheckProblem& problem, const GradCheckOptions& options);

}  // namespace bico
