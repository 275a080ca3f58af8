#include "lrep/decoder/params.hpp"

#include <cmath>

#include "lrep/errors.hpp"
#include "lrep/numerics/random.hpp"

namespace lrep::decoder {

std::string_view to_string(AttentionMode m) { return m == AttentionMode::cross ? "cross" : "self"; }

AttentionMode attention_mode_from_string(std::string_view s) {
    if (s == "cross") return AttentionMode::cross;
    if (s == "self") return AttentionMode::self;
    throw ConfigError("attention mode must be 'cross' or 'self', got '" + std::string(s) + "'");
}

std::string_view to_string(Pooling p) { return p == Pooling::mean ? "mean" : "first_token"; }

Pooling pooling_from_string(std::string_view s) {
    if (s == "mean") return Pooling::mean;
    if (s == "first_token") return Pooling::first_token;
    throw ConfigError("pooling must be 'mean' or 'first_token', got '" + std::string(s) + "'");
}

void DecoderConfig::validate() const {
    if (d_model == 0 || d_k == 0 || d_v == 0) throw ConfigError("d_model, d_k and d_v must be positive");
    if (heads == 0) throw ConfigError("heads must be positive");
    if (d_k % heads != 0 || d_v % heads != 0) {
        throw ConfigError("heads (" + std::to_string(heads) + ") must divide d_k (" +
                          std::to_string(d_k) + ") and d_v (" + std::to_string(d_v) + ")");
    }
    for (std::size_t w : mlp_hidden)
        if (w == 0) throw ConfigError("MLP hidden widths must be positive");
    if (residual && d_v != d_model) throw ConfigError("residual connections need d_v == d_model");
    if (!(prob_epsilon > 0.0 && prob_epsilon < 0.5)) throw ConfigError("prob_epsilon must be in (0, 0.5)");
}

nlohmann::json DecoderConfig::to_json() const {
    return {{"d_model", d_model},       {"d_k", d_k},
            {"d_v", d_v},               {"heads", heads},
            {"mlp_hidden", mlp_hidden}, {"pooling", std::string(to_string(pooling))},
            {"residual", residual},     {"layer_norm", layer_norm},
            {"layer_norm_eps", layer_norm_eps}, {"prob_epsilon", prob_epsilon}};
}

DecoderConfig DecoderConfig::from_json(const nlohmann::json& j) {
    DecoderConfig c;
    try {
        c.d_model = j.value("d_model", c.d_model);
        c.d_k = j.value("d_k", c.d_model);
        c.d_v = j.value("d_v", c.d_model);
        c.heads = j.value("heads", c.heads);
        c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
        c.pooling = pooling_from_string(j.value("pooling", std::string("mean")));
        c.residual = j.value("residual", c.residual);
        c.layer_norm = j.value("layer_norm", c.layer_norm);
        c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
        c.prob_epsilon = j.value("prob_epsilon", c.prob_epsilon);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("decoder config: ") + e.what());
    }
    c.validate();
    return c;
}

std::size_t ParameterStore::add(std::string name, Matrix value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
    index_.emplace(name, values_.size());
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
}

std::size_t ParameterStore::index(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
    return it->second;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const Matrix& m : values_) n += m.size();
    return n;
}

std::vector<double> ParameterStore::flatten() const {
    std::vector<double> flat;
    flat.reserve(scalar_count());
    for (const Matrix& m : values_) flat.insert(flat.end(), m.data().begin(), m.data().end());
    return flat;
}

void ParameterStore::assign_flat(std::span<const double> flat) {
    if (flat.size() != scalar_count()) {
        throw ShapeError("assign_flat: " + std::to_string(flat.size()) + " values for " +
                         std::to_string(scalar_count()) + " parameters");
    }
    std::size_t k = 0;
    for (Matrix& m : values_)
        for (double& x : m.data()) x = flat[k++];
}

representation::Projector DecoderParams::projector() const {
    representation::Projector p(config.d_model);
    for (const auto& s : registry.sources()) p.bind(s.id, store.at("proj." + s.id));
    return p;
}

AttentionWeights DecoderParams::diff_attention() const {
    return {&store.at("diff.w_q"), &store.at("diff.w_k"), &store.at("diff.w_v"), config.heads};
}

AttentionWeights DecoderParams::align_attention() const {
    return {&store.at("align.w_q"), &store.at("align.w_k"), &store.at("align.w_v"), config.heads};
}

const Matrix& DecoderParams::mlp_weight(std::size_t layer) const {
    return store.at("mlp." + std::to_string(layer) + ".weight");
}

const Matrix& DecoderParams::mlp_bias(std::size_t layer) const {
    return store.at("mlp." + std::to_string(layer) + ".bias");
}

namespace {

Matrix uniform_tensor(std::uint64_t seed, const std::string& name, std::size_t rows, std::size_t cols,
                      std::size_t fan_in) {
    numerics::Rng rng(numerics::derive_seed(seed, name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix m(rows, cols);
    for (double& x : m.data()) x = rng.uniform(-bound, bound);
    return m;
}

}  // namespace

DecoderParams init_params(const DecoderConfig& config, const representation::SourceRegistry& registry,
                          std::uint64_t seed) {
    config.validate();
    DecoderParams p;
    p.config = config;
    p.registry = registry;
    auto add = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        p.store.add(name, uniform_tensor(seed, name, rows, cols, rows));
    };
    for (const auto& s : registry.sources()) add("proj." + s.id, s.dim, config.d_model);
    add("diff.w_q", config.d_model, config.d_k);
    add("diff.w_k", config.d_model, config.d_k);
    add("diff.w_v", config.d_model, config.d_v);
    add("align.w_q", config.d_v, config.d_k);
    add("align.w_k", config.d_model, config.d_k);
    add("align.w_v", config.d_model, config.d_v);
    std::size_t in = config.d_v;
    std::vector<std::size_t> widths = config.mlp_hidden;
    widths.push_back(kLogitCount);
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const std::string prefix = "mlp." + std::to_string(i);
        add(prefix + ".weight", in, widths[i]);
        p.store.add(prefix + ".bias", uniform_tensor(seed, prefix + ".bias", 1, widths[i], in));
        in = widths[i];
    }
    return p;
}

ParamCount count_params(const DecoderParams& params) {
    ParamCount c;
    for (std::size_t i = 0; i < params.store.size(); ++i) {
        const std::string& n = params.store.name(i);
        const std::size_t k = params.store.at(i).size();
        if (n.rfind("proj.", 0) == 0) {
            c.projections += k;
        } else if (n.rfind("diff.", 0) == 0) {
            c.diff_attention += k;
        } else if (n.rfind("align.", 0) == 0) {
            c.align_attention += k;
        } else {
            c.mlp += k;
        }
    }
    return c;
}

DecoderParams round_to_storage(DecoderParams params) {
    for (Matrix& m : params.store.values())
        for (double& x : m.data()) x = static_cast<double>(static_cast<float>(x));
    return params;
}

}  // namespace lrep::decoder
