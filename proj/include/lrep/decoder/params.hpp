#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrep/numerics/matrix.hpp"
#include "lrep/representation/assembly.hpp"
#include "lrep/representation/source_registry.hpp"

namespace lrep::decoder {

using numerics::Matrix;

enum class AttentionMode { cross, self };
enum class Pooling { mean, first_token };

std::string_view to_string(AttentionMode m);
AttentionMode attention_mode_from_string(std::string_view s);
std::string_view to_string(Pooling p);
Pooling pooling_from_string(std::string_view s);

struct DecoderConfig {
    std::size_t d_model = 256;
    std::size_t d_k = 256;
    std::size_t d_v = 256;
    std::size_t heads = 1;
    std::vector<std::size_t> mlp_hidden = {256, 64};
    Pooling pooling = Pooling::mean;
    bool residual = false;
    bool layer_norm = false;
    double layer_norm_eps = 1e-5;
    double prob_epsilon = 1e-12;

    /// Throws ConfigError for inconsistent dims (zero sizes, heads not
    /// dividing d_k/d_v, residual without d_v == d_model).
    void validate() const;

    nlohmann::json to_json() const;
    static DecoderConfig from_json(const nlohmann::json& j);

    friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

/// Ordered, named trainable tensors. Order is fixed at construction and is
/// the order used for gradients, optimizer state and checkpoints.
class ParameterStore {
public:
    std::size_t add(std::string name, Matrix value);

    std::size_t size() const noexcept { return values_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    std::size_t index(std::string_view name) const;
    bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }

    Matrix& at(std::size_t i) { return values_.at(i); }
    const Matrix& at(std::size_t i) const { return values_.at(i); }
    Matrix& at(std::string_view name) { return values_.at(index(name)); }
    const Matrix& at(std::string_view name) const { return values_.at(index(name)); }

    std::vector<Matrix>& values() noexcept { return values_; }
    const std::vector<Matrix>& values() const noexcept { return values_; }
    std::size_t scalar_count() const;

    /// Flat view for gradient checks.
    std::vector<double> flatten() const;
    void assign_flat(std::span<const double> flat);

    friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
        return a.names_ == b.names_ && a.values_ == b.values_;
    }

private:
    std::vector<std::string> names_;
    std::vector<Matrix> values_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// W_q, W_k, W_v of one attention block, non-owning.
struct AttentionWeights {
    const Matrix* w_q = nullptr;
    const Matrix* w_k = nullptr;
    const Matrix* w_v = nullptr;
    std::size_t heads = 1;
};

/// Owning attention weights for standalone use.
struct AttentionBlockParams {
    Matrix w_q;
    Matrix w_k;
    Matrix w_v;
    std::size_t heads = 1;

    AttentionWeights view() const { return {&w_q, &w_k, &w_v, heads}; }
};

/// All trainable weights: per-source projections, the difference and
/// alignment attention blocks, and the MLP head.
struct DecoderParams {
    DecoderConfig config;
    representation::SourceRegistry registry;
    ParameterStore store;

    representation::Projector projector() const;
    AttentionWeights diff_attention() const;
    AttentionWeights align_attention() const;
    std::size_t mlp_layers() const { return config.mlp_hidden.size() + 1; }
    const Matrix& mlp_weight(std::size_t layer) const;
    const Matrix& mlp_bias(std::size_t layer) const;

    friend bool operator==(const DecoderParams&, const DecoderParams&) = default;
};

inline constexpr std::size_t kLogitCount = 2;

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; each tensor draws from its
/// own stream derived from (seed, tensor name).
DecoderParams init_params(const DecoderConfig& config, const representation::SourceRegistry& registry,
                          std::uint64_t seed);

struct ParamCount {
    std::size_t projections = 0;
    std::size_t diff_attention = 0;
    std::size_t align_attention = 0;
    std::size_t mlp = 0;

    std::size_t total() const { return projections + diff_attention + align_attention + mlp; }
};

ParamCount count_params(const DecoderParams& params);

/// Every value rounded through 32-bit float, the checkpoint storage precision.
DecoderParams round_to_storage(DecoderParams params);

}  // namespace lrep::decoder
