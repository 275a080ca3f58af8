#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace lrep::numerics {

using ScalarFunction = std::function<double(std::span<const double>)>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Compares `analytic` against central differences (f(x+h) - f(x-h)) / 2h,
/// coordinate by coordinate. The error per coordinate is
/// |a - n| / max(1, |a|, |n|).
GradCheckResult grad_check(const ScalarFunction& f, std::span<const double> params,
                           std::span<const double> analytic, double h = 1e-5);

}  // namespace lrep::numerics
