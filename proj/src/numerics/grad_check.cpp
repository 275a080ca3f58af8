#include "lrep/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lrep/errors.hpp"

namespace lrep::numerics {

GradCheckResult grad_check(const ScalarFunction& f, std::span<const double> params,
                           std::span<const double> analytic, double h) {
    if (!(h > 0.0)) throw ConfigError("grad_check: step must be positive");
    if (params.size() != analytic.size()) {
        throw ShapeError("grad_check: " + std::to_string(params.size()) + " params but " +
                         std::to_string(analytic.size()) + " analytic entries");
    }
    std::vector<double> x(params.begin(), params.end());
    GradCheckResult result;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("grad_check: non-finite function value at coordinate " +
                               std::to_string(i));
        }
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
        const double err = std::abs(analytic[i] - numeric) / denom;
        if (i == 0 || err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_index = i;
            result.worst_analytic = analytic[i];
            result.worst_numeric = numeric;
        }
    }
    return result;
}

}  // namespace lrep::numerics
