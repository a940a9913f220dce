#include "bico/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "bico/common.hpp"

namespace bico {

namespace {

long double checked(long double v) {
    if (!std::isfinite(v)) {
        throw NumericError("gradient check: loss evaluated to a non-finite value");
    }
    return v;
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<long double()>& loss,
                                  std::span<const ParamGroup> params,
                                  std::span<const std::vector<double>> analytic,
                                  const GradCheckOptions& options) {
    if (!(options.step > 0.0)) {
        throw std::invalid_argument("gradient check: step must be positive");
    }
    if (params.size() != analytic.size()) {
        throw std::invalid_argument("gradient check: one analytic block per parameter group required");
    }
    std::size_t total = 0;
    for (std::size_t g = 0; g < params.size(); ++g) {
        if (params[g].values.size() != analytic[g].size()) {
            throw std::invalid_argument("gradient check: analytic block size mismatch in " + params[g].name);
        }
        total += params[g].values.size();
    }
    checked(loss());

    const bool exhaustive = total <= options.exhaustive_limit;
    std::mt19937_64 rng(options.seed);
    GradCheckReport report;

    for (std::size_t g = 0; g < params.size(); ++g) {
        std::span<double> values = params[g].values;
        std::vector<std::size_t> coords(values.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (!exhaustive && coords.size() > options.samples_per_group) {
            std::vector<std::size_t> picked;
            picked.reserve(options.samples_per_group);
            std::sample(coords.begin(), coords.end(), std::back_inserter(picked),
                        options.samples_per_group, rng);
            coords = std::move(picked);
        }
        for (std::size_t i : coords) {
            const double original = values[i];
            const double plus = original + options.step;
            const double minus = original - options.step;
            values[i] = plus;
            const long double up = loss();
            values[i] = minus;
            const long double down = loss();
            values[i] = original;
            checked(up);
            checked(down);

            // Divide by the step actually taken after rounding to double.
            const auto numeric = static_cast<double>(
                (up - down) / (static_cast<long double>(plus) - static_cast<long double>(minus)));
            const double a = analytic[g][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            ++report.coordinates_checked;
            if (report.coordinates_checked == 1 || rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_group = params[g].name;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error <= options.tolerance;
    return report;
}

}  // namespace bico
