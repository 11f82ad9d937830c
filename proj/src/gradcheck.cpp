#include "multibal/gradcheck.hpp"

#include "multibal/errors.hpp"

#include <cmath>

namespace multibal {

GradCheckResult finite_diff_check(const DifferentiableLoss &loss, const Vector &params, double eps) {
    require(eps >= 1e-7 && eps <= 1e-3, ErrorKind::config, "finite_diff_check: eps must lie in [1e-7, 1e-3]");
    Vector analytic(params.size());
    const double base = loss(params, &analytic);
    require(std::isfinite(base), ErrorKind::numeric, "finite_diff_check: loss is not finite");
    require(analytic.size() == params.size(), ErrorKind::shape, "finite_diff_check: gradient size mismatch");

    GradCheckResult result;
    Vector probe = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        probe[i] = params[i] + eps;
        const double plus = loss(probe, nullptr);
        probe[i] = params[i] - eps;
        const double minus = loss(probe, nullptr);
        probe[i] = params[i];
        require(std::isfinite(plus) && std::isfinite(minus), ErrorKind::numeric,
                "finite_diff_check: loss is not finite near the evaluation point");
        const double numeric = (plus - minus) / (2.0 * eps);
        const double err = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + std::abs(numeric) + 1e-12);
        if (err > result.max_relative_error || result.worst_index < 0) {
            result.max_relative_error = err;
            result.worst_index = i;
            result.analytic_at_worst = analytic[i];
            result.numeric_at_worst = numeric;
        }
    }
    return result;
}

}  // namespace multibal
