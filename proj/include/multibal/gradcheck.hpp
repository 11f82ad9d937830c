#pragma once

#include "multibal/matrix.hpp"

#include <functional>

namespace multibal {

/// Loss callback: returns the loss and, when grad != nullptr, writes the
/// analytic gradient (same length as params).
using DifferentiableLoss = std::function<double(const Vector &params, Vector *grad)>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    Eigen::Index worst_index = -1;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

/// Central differences on every coordinate.
/// error_i = |analytic_i - numeric_i| / (|analytic_i| + |numeric_i| + 1e-12)
/// eps must lie in [1e-7, 1e-3]; non-finite loss values throw a numeric error.
GradCheckResult finite_diff_check(const DifferentiableLoss &loss, const Vector &params, double eps = 1e-5);

}  // namespace multibal
