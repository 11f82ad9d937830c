#pragma once

#include "multibal/matrix.hpp"

namespace multibal {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimState {
    Vector first_moment;
    Vector second_moment;
    long step = 0;
    AdamConfig config;

    OptimState() = default;
    OptimState(Eigen::Index size, AdamConfig cfg);
};

/// Standard Adam update with bias correction. Throws on shape mismatch.
void adam_step(Vector &params, const Vector &grads, OptimState &state);

}  // namespace multibal
