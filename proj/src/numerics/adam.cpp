#include "lrep/numerics/adam.hpp"

#include <cmath>

#include "lrep/errors.hpp"

namespace lrep::numerics {

AdamState make_adam_state(const AdamConfig& config, std::span<const Matrix> params) {
    AdamState state;
    state.config = config;
    for (const Matrix& p : params) {
        state.m.emplace_back(p.rows(), p.cols());
        state.v.emplace_back(p.rows(), p.cols());
    }
    return state;
}

void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " +
                         std::to_string(state.m.size()) + " moment slots");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto same = [&](const Matrix& o) {
            return o.rows() == params[i].rows() && o.cols() == params[i].cols();
        };
        if (!same(grads[i]) || !same(state.m[i]) || !same(state.v[i])) {
            throw ShapeError("adam_step: tensor " + std::to_string(i) + " param " +
                             params[i].shape_string() + " vs grad " + grads[i].shape_string());
        }
    }

    const AdamConfig& c = state.config;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    const double decay = 1.0 - c.lr * c.weight_decay;

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].data();
        auto g = grads[i].data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
            v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            p[k] = p[k] * decay - c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

}  // namespace lrep::numerics
