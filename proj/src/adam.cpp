#include "multibal/adam.hpp"

#include "multibal/errors.hpp"

#include <cmath>

namespace multibal {

OptimState::OptimState(Eigen::Index size, AdamConfig cfg)
    : first_moment(Vector::Zero(size)), second_moment(Vector::Zero(size)), config(cfg) {}

void adam_step(Vector &params, const Vector &grads, OptimState &state) {
    require(params.size() == grads.size() && params.size() == state.first_moment.size() &&
                params.size() == state.second_moment.size(),
            ErrorKind::shape, "adam_step: parameter, gradient and state sizes differ");
    const AdamConfig &c = state.config;
    ++state.step;
    state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grads;
    state.second_moment = c.beta2 * state.second_moment + (1.0 - c.beta2) * grads.cwiseProduct(grads);
    const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    const auto m_hat = state.first_moment.array() / correction1;
    const auto v_hat = state.second_moment.array() / correction2;
    params.array() -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
}

}  // namespace multibal
