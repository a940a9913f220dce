#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace bico {

/// A named, mutable block of parameters the checker may perturb in place.
struct ParamGroup {
    std::string name;
    std::span<double> values;
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    // Every coordinate is checked when the total parameter count is at most
    // this; otherwise up to samples_per_group coordinates per group.
    std::size_t exhaustive_limit = 2000;
    std::size_t samples_per_group = 256;
    std::uint64_t seed = 0x5eed;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_group;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t coordinates_checked = 0;
    bool passed = true;
};

/// Central-difference check of an analytic gradient.
///
/// `loss` is re-evaluated with each sampled coordinate of `params` nudged by
/// +/- step and must read the parameters through the same storage. `analytic`
/// holds one gradient block per group, aligned with `params`. The relative
/// error of a coordinate is |a - n| / max(|a|, |n|, 1e-8). Throws NumericError
/// if any loss evaluation is non-finite. Parameters are restored on return.
/// The loss may be computed in extended precision to keep rounding noise in
/// the differences well below the tolerance.
GradCheckReport finite_diff_check(const std::function<long double()>& loss,
                                  std::span<const ParamGroup> params,
                                  std::span<const std::vector<double>> analytic,
                                  const GradCheckOptions& options = {});

}  // namespace bico
