#pragma once

#include <optional>

#include "lrep/dataset/synthetic.hpp"
#include "lrep/harness/harness.hpp"

namespace fixture {

/// Synthetic data plus a split, kept together so the Experiment spans stay valid.
struct SyntheticRun {
    lrep::dataset::SyntheticData data;
    lrep::dataset::DatasetSplit split;

    lrep::harness::Experiment experiment() const { return {data.episodes, split, &data.store, data.registry}; }
};

inline SyntheticRun synthetic_run(std::size_t train, std::size_t val, std::size_t test, std::uint64_t seed,
                                  std::optional<lrep::representation::Group> signal = std::nullopt) {
    lrep::dataset::SyntheticConfig c;
    c.n_episodes = train + val + test;
    c.seed = seed;
    c.signal_group = signal;
    SyntheticRun run{lrep::dataset::generate_synthetic(c), {}};
    run.split = lrep::dataset::split_dataset(run.data.episodes, {train, val, test}, seed);
    return run;
}

/// Desk profile shrunk further for fast unit tests.
inline lrep::harness::TrainConfig tiny_config(std::size_t epochs) {
    auto c = lrep::harness::TrainConfig::desk();
    c.epochs = epochs;
    c.decoder.d_model = c.decoder.d_k = c.decoder.d_v = 8;
    c.decoder.mlp_hidden = {8};
    return c;
}

}  // namespace fixture
