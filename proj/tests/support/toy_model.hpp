#pragma once

// Small random decoder instances for gradient and property checks.

#include <cstdint>
#include <string>

#include "lrep/decoder/decoder.hpp"
#include "lrep/decoder/params.hpp"
#include "lrep/numerics/grad_check.hpp"
#include "lrep/numerics/random.hpp"
#include "lrep/representation/assembly.hpp"
#include "lrep/representation/provider.hpp"

namespace toy {

namespace rep = lrep::representation;
namespace dec = lrep::decoder;

/// 4 image tokens (2 scene, 1 aligned, 1 narrative) and 2 language tokens,
/// source dims <= 6, d_model <= 8.
inline rep::SourceRegistry registry(lrep::numerics::Rng& rng) {
    return rep::register_sources({{"s0", 2 + rng.index(5), rep::Group::scene},
                                  {"s1", 2 + rng.index(5), rep::Group::scene},
                                  {"a0", 2 + rng.index(5), rep::Group::aligned},
                                  {"n0", 2 + rng.index(5), rep::Group::narrative},
                                  {"l0", 2 + rng.index(5), rep::Group::instruction},
                                  {"l1", 2 + rng.index(5), rep::Group::instruction}});
}

struct Instance {
    dec::DecoderParams params;
    rep::EpisodeFeatures features;
    int label = 0;
};

inline Instance make(std::uint64_t seed, dec::DecoderConfig config = {}) {
    lrep::numerics::Rng rng(seed);
    const rep::SourceRegistry reg = registry(rng);
    if (config.d_model == 256) {
        config.d_model = 3 + rng.index(6);
        config.d_k = config.d_model;
        config.d_v = config.d_model;
        config.mlp_hidden = {3 + rng.index(4)};
    }
    Instance inst;
    inst.params = dec::init_params(config, reg, seed * 7919 + 1);
    const rep::RandomProvider provider(reg, seed);
    inst.features = rep::gather_episode(provider, reg, "toy" + std::to_string(seed));
    inst.label = static_cast<int>(rng.index(2));
    return inst;
}

/// Max relative error of the analytic cross-entropy gradient against central
/// differences over every parameter scalar.
inline lrep::numerics::GradCheckResult check(const Instance& inst, dec::AttentionMode mode, double h = 1e-6) {
    const auto lg = dec::loss_and_grad(inst.features, inst.label, inst.params, mode);
    std::vector<double> analytic;
    for (const auto& g : lg.grads) analytic.insert(analytic.end(), g.data().begin(), g.data().end());
    dec::DecoderParams scratch = inst.params;
    const auto f = [&](std::span<const double> x) {
        scratch.store.assign_flat(x);
        return dec::loss_only(inst.features, inst.label, scratch, mode);
    };
    return lrep::numerics::grad_check(f, inst.params.store.flatten(), analytic, h);
}

}  // namespace toy
