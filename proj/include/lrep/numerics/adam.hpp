#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lrep/numerics/matrix.hpp"

namespace lrep::numerics {

struct AdamConfig {
    double lr = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Decoupled: each step multiplies parameters by (1 - lr * weight_decay)
    /// before the moment-based update.
    double weight_decay = 1e-1;
};

struct AdamState {
    AdamConfig config;
    std::size_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

/// Zero moments shaped like `params`.
AdamState make_adam_state(const AdamConfig& config, std::span<const Matrix> params);

/// One bias-corrected Adam update with decoupled weight decay.
void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state);

}  // namespace lrep::numerics
