#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrep/dataset/episode.hpp"
#include "lrep/decoder/checkpoint.hpp"
#include "lrep/decoder/decoder.hpp"
#include "lrep/numerics/adam.hpp"
#include "lrep/representation/assembly.hpp"
#include "lrep/representation/provider.hpp"

namespace lrep::harness {

namespace rep = representation;
using dataset::Episode;
using decoder::AttentionMode;
using decoder::DecoderParams;

struct TrainConfig {
    numerics::AdamConfig adam;
    std::size_t batch_size = 32;
    std::size_t epochs = 150;
    std::uint64_t seed = 0;
    AttentionMode mode = AttentionMode::cross;
    std::set<rep::Group> enabled_groups = {rep::Group::scene, rep::Group::aligned, rep::Group::narrative};
    decoder::DecoderConfig decoder;
    double threshold = 0.5;
    /// Evaluation drops episodes whose features cannot be loaded instead of failing.
    bool skip_missing = false;

    /// lr 1e-6, weight decay 0.1, batch 32, 150 epochs, 256-wide decoder.
    static TrainConfig paper();
    /// lr 1e-3, 30 epochs, 32-wide decoder.
    static TrainConfig desk();
    static TrainConfig profile(std::string_view name);

    void validate() const;
    nlohmann::json to_json() const;
    /// Fields present in `j` override the profile named by j["profile"]
    /// (default "paper").
    static TrainConfig from_json(const nlohmann::json& j);
    std::uint64_t digest() const;
};

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    double threshold = 0.5;

    std::size_t total() const { return tp + fp + tn + fn; }
    std::size_t correct() const { return tp + tn; }
    /// 0 for an empty matrix.
    double accuracy() const;
    void add(double p_success, int label);

    nlohmann::json to_json() const;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Pooled two-proportion z-test on the accuracies of two matrices over the
/// same number of samples; two-sided p-value. Identical proportions give 1.
double significance_test(const ConfusionMatrix& a, const ConfusionMatrix& b);

struct LabelledFeatures {
    std::string episode_id;
    rep::EpisodeFeatures features;
    int label = 0;
};

struct LoadFailure {
    std::string episode_id;
    std::string kind;
    std::string message;
};

struct LoadedSet {
    std::vector<LabelledFeatures> items;
    std::vector<LoadFailure> failures;
};

/// Gathers before/after/instruction features. Without `skip_missing` the
/// first failure is rethrown.
LoadedSet load_features(std::span<const Episode> episodes, const rep::EmbeddingProvider& provider,
                        const rep::SourceRegistry& registry, bool skip_missing = false);

/// p_success for one before/after pair.
using Predictor = std::function<double(const rep::EpisodeFeatures&)>;

Predictor model_predictor(const DecoderParams& params, AttentionMode mode);

ConfusionMatrix evaluate(const Predictor& predict, std::span<const LabelledFeatures> items, double threshold = 0.5);

struct EvalReport {
    ConfusionMatrix matrix;
    std::vector<LoadFailure> excluded;
};

/// Loads features with the checkpoint's registry and tallies predictions.
EvalReport evaluate(const decoder::Checkpoint& checkpoint, std::span<const Episode> episodes,
                    const rep::EmbeddingProvider& provider, double threshold = 0.5, bool skip_missing = false);

/// Index of the largest value; ties go to the earliest.
std::size_t best_epoch(std::span<const double> val_accuracy);

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    std::vector<double> train_loss;
    std::vector<double> val_accuracy;
    std::size_t best_epoch = 0;
    /// Parameters of the best epoch, rounded to checkpoint precision.
    DecoderParams best;
};

/// Mini-batch Adam over `train`, validation accuracy after every epoch.
/// `registry` must already be restricted to the enabled groups. Throws
/// TrainingError on a non-finite loss.
TrainResult train(std::span<const LabelledFeatures> train, std::span<const LabelledFeatures> val,
                  const TrainConfig& config, const rep::SourceRegistry& registry,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

struct RunResult {
    std::vector<double> train_loss;
    std::vector<double> val_accuracy;
    std::size_t best_epoch = 0;
    ConfusionMatrix test;
    std::vector<std::uint64_t> seeds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::uint64_t config_digest = 0;

    nlohmann::json to_json() const;
    /// One row per epoch.
    std::string to_csv() const;
    friend bool operator==(const RunResult&, const RunResult&) = default;
};

/// Everything a run reads.
struct Experiment {
    std::span<const Episode> episodes;
    dataset::DatasetSplit split;
    const rep::EmbeddingProvider* provider = nullptr;
    rep::SourceRegistry registry;  // full registry; runs restrict it
};

struct RunOutput {
    RunResult result;
    DecoderParams params;
};

/// Train on split.train, select on split.val, evaluate on split.test.
/// Saves the selected model when `checkpoint` is given.
RunOutput run_experiment(const Experiment& experiment, const TrainConfig& config,
                         const std::optional<std::filesystem::path>& checkpoint = std::nullopt,
                         const std::function<void(const EpochLog&)>& on_epoch = {});

nlohmann::json checkpoint_metadata(const TrainConfig& config, const RunResult& result);

struct AblationCondition {
    std::string name;
    std::set<rep::Group> groups;
    AttentionMode mode = AttentionMode::cross;
};

/// Rows (i) to (vii): AR+NR, SR+NR, SR+AR, SR, AR, NR, SR+AR+NR.
std::vector<AblationCondition> representation_conditions();
/// Full representation with self and with cross attention.
std::vector<AblationCondition> mode_conditions();
std::vector<AblationCondition> default_conditions();

struct AblationRow {
    AblationCondition condition;
    RunResult result;
};

struct AblationTable {
    std::vector<AblationRow> rows;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Each condition trains and evaluates independently with the base seed.
/// Up to `jobs` conditions run concurrently.
AblationTable run_ablation(const Experiment& experiment, const TrainConfig& base,
                           std::span<const AblationCondition> conditions, std::size_t jobs = 1);

struct SweepResult {
    std::vector<std::uint64_t> seeds;
    std::vector<double> accuracies;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for one seed

    nlohmann::json to_json() const;
};

SweepResult summarize(std::vector<std::uint64_t> seeds, std::vector<double> accuracies);

/// Seeds base.seed, base.seed+1, ...; each runs run_experiment.
SweepResult seed_sweep(const Experiment& experiment, const TrainConfig& base, std::size_t n_seeds = 5,
                       std::size_t jobs = 1);

struct VideoResult {
    bool success = false;
    std::optional<std::size_t> first_success;  // pair index n
    std::vector<double> probabilities;        // index n-1 holds pair n

    nlohmann::json to_json() const;
};

/// Success iff some pair (0, n) is predicted success.
VideoResult classify_video(const Predictor& predict, const Episode& episode, const rep::EmbeddingProvider& provider,
                           const rep::SourceRegistry& registry, double threshold = 0.5);
VideoResult classify_video(const decoder::Checkpoint& checkpoint, const Episode& episode,
                           const rep::EmbeddingProvider& provider, double threshold = 0.5);

}  // namespace lrep::harness
