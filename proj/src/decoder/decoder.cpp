#include "lrep/decoder/decoder.hpp"

#include <cmath>

#include "lrep/errors.hpp"
#include "lrep/numerics/kernels.hpp"

namespace lrep::decoder {

using representation::EpisodeFeatures;
using representation::FeatureBlock;
using representation::LambdaBlocks;

namespace {

void check_attention_shapes(const Matrix& x_a, const Matrix& x_b, const Matrix& wq, const Matrix& wk,
                            const Matrix& wv, std::size_t heads) {
    if (x_b.rows() == 0) throw EmptyKeysError("attention over an empty key/value sequence");
    if (x_a.cols() != wq.rows() || x_b.cols() != wk.rows() || x_b.cols() != wv.rows()) {
        throw ShapeError("attention: queries " + x_a.shape_string() + ", keys " + x_b.shape_string() +
                         " do not fit W_q " + wq.shape_string() + ", W_k " + wk.shape_string() +
                         ", W_v " + wv.shape_string());
    }
    if (wq.cols() != wk.cols()) {
        throw ShapeError("attention: W_q " + wq.shape_string() + " and W_k " + wk.shape_string() +
                         " disagree on d_k");
    }
    if (heads == 0 || wk.cols() % heads != 0 || wv.cols() % heads != 0) {
        throw ShapeError("attention: " + std::to_string(heads) + " heads do not divide d_k " +
                         std::to_string(wk.cols()) + " / d_v " + std::to_string(wv.cols()));
    }
}

struct AttentionTrace {
    NodeId output;
    NodeId first_head_weights;
};

AttentionTrace record_attention(Tape& tape, NodeId x_a, NodeId x_b, const AttentionNodes& w) {
    check_attention_shapes(tape.value(x_a), tape.value(x_b), tape.value(w.w_q), tape.value(w.w_k),
                           tape.value(w.w_v), w.heads);
    const NodeId q = tape.matmul(x_a, w.w_q);
    const NodeId k = tape.matmul(x_b, w.w_k);
    const NodeId v = tape.matmul(x_b, w.w_v);
    const std::size_t dk = tape.value(k).cols() / w.heads;
    const std::size_t dv = tape.value(v).cols() / w.heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    if (w.heads == 1) {
        const NodeId logits = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dk);
        const NodeId a = tape.softmax_rows(logits);
        return {tape.matmul(a, v), a};
    }
    std::vector<NodeId> outs;
    NodeId first = 0;
    const std::size_t nq = tape.value(q).rows(), nk = tape.value(k).rows();
    for (std::size_t h = 0; h < w.heads; ++h) {
        const NodeId qh = tape.slice(q, 0, nq, h * dk, dk);
        const NodeId kh = tape.slice(k, 0, nk, h * dk, dk);
        const NodeId vh = tape.slice(v, 0, nk, h * dv, dv);
        const NodeId a = tape.softmax_rows(tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dk));
        if (h == 0) first = a;
        outs.push_back(tape.matmul(a, vh));
    }
    return {tape.concat_cols(outs), first};
}

AttentionNodes constant_nodes(Tape& tape, const AttentionWeights& w) {
    if (!w.w_q || !w.w_k || !w.w_v) throw ConfigError("attention weights are not bound");
    return {tape.parameter(*w.w_q), tape.parameter(*w.w_k), tape.parameter(*w.w_v), w.heads};
}

}  // namespace

NodeId cross_attention(Tape& tape, NodeId x_a, NodeId x_b, const AttentionNodes& w) {
    return record_attention(tape, x_a, x_b, w).output;
}

NodeId concat_self_attention(Tape& tape, NodeId x_a, NodeId x_b, const AttentionNodes& w) {
    const std::size_t rows_a = tape.value(x_a).rows();
    if (tape.value(x_a).cols() != tape.value(x_b).cols()) {
        throw ShapeError("self-attention mode needs operands of equal width, got " +
                         tape.value(x_a).shape_string() + " and " + tape.value(x_b).shape_string());
    }
    const NodeId parts[2] = {x_a, x_b};
    const NodeId x = tape.concat_rows(parts);
    const NodeId out = cross_attention(tape, x, x, w);
    return tape.slice(out, 0, rows_a, 0, tape.value(out).cols());
}

Matrix cross_attention(const Matrix& x_a, const Matrix& x_b, const AttentionWeights& w) {
    Tape tape;
    const AttentionNodes nodes = constant_nodes(tape, w);
    const NodeId a = tape.parameter(x_a);
    const NodeId b = tape.parameter(x_b);
    return tape.value(cross_attention(tape, a, b, nodes));
}

Matrix self_attention(const Matrix& x, const AttentionWeights& w) { return cross_attention(x, x, w); }

Matrix attention_weights(const Matrix& x_a, const Matrix& x_b, const AttentionWeights& w) {
    Tape tape;
    const AttentionNodes nodes = constant_nodes(tape, w);
    const NodeId a = tape.parameter(x_a);
    const NodeId b = tape.parameter(x_b);
    return tape.value(record_attention(tape, a, b, nodes).first_head_weights);
}

namespace {

AttentionNodes diff_nodes(const DecoderParams& params, const std::vector<NodeId>& p) {
    return {p[params.store.index("diff.w_q")], p[params.store.index("diff.w_k")],
            p[params.store.index("diff.w_v")], params.config.heads};
}

AttentionNodes align_nodes(const DecoderParams& params, const std::vector<NodeId>& p) {
    return {p[params.store.index("align.w_q")], p[params.store.index("align.w_k")],
            p[params.store.index("align.w_v")], params.config.heads};
}

/// One projected token per block, stacked into a (blocks x d_model) node.
NodeId record_tokens(Tape& tape, const std::vector<FeatureBlock>& blocks, const DecoderParams& params,
                     const std::vector<NodeId>& p) {
    std::vector<NodeId> rows;
    rows.reserve(blocks.size());
    for (const FeatureBlock& b : blocks) {
        const auto* spec = params.registry.find(b.source_id);
        if (!spec) throw ConfigError("block source '" + b.source_id + "' is not in the model registry");
        if (spec->dim != b.dim()) {
            throw ShapeError("block '" + b.source_id + "' has dim " + std::to_string(b.dim()) +
                             ", model expects " + std::to_string(spec->dim));
        }
        Matrix x(1, b.dim());
        for (std::size_t i = 0; i < b.dim(); ++i) x(0, i) = b.values[i];
        rows.push_back(tape.matmul(tape.constant(std::move(x)), p[params.store.index("proj." + b.source_id)]));
    }
    return tape.concat_rows(rows);
}

void check_structure(const LambdaBlocks& after, const LambdaBlocks& before) {
    bool same = after.groups == before.groups && after.blocks.size() == before.blocks.size();
    for (std::size_t i = 0; same && i < after.blocks.size(); ++i)
        same = after.blocks[i].source_id == before.blocks[i].source_id;
    if (!same) {
        throw ShapeError("before/after representations differ in token structure (" +
                         std::to_string(before.token_count()) + " vs " +
                         std::to_string(after.token_count()) + " tokens)");
    }
}

NodeId record_block(Tape& tape, NodeId queries, NodeId keys, const AttentionNodes& w, AttentionMode mode,
                    const DecoderConfig& config) {
    NodeId out = mode == AttentionMode::cross ? cross_attention(tape, queries, keys, w)
                                              : concat_self_attention(tape, queries, keys, w);
    if (config.residual) out = tape.add(out, queries);
    if (config.layer_norm) out = tape.layer_norm(out, config.layer_norm_eps);
    return out;
}

/// Pooling + MLP + softmax; returns {logits, probs}.
std::pair<NodeId, NodeId> record_head(Tape& tape, NodeId h_align, const DecoderParams& params,
                                      const std::vector<NodeId>& p) {
    const Matrix& h = tape.value(h_align);
    if (h.rows() == 0) throw ShapeError("mlp_head: empty h_align");
    NodeId x = params.config.pooling == Pooling::mean ? tape.mean_rows(h_align)
                                                      : tape.slice(h_align, 0, 1, 0, h.cols());
    const std::size_t layers = params.mlp_layers();
    for (std::size_t i = 0; i < layers; ++i) {
        const std::string prefix = "mlp." + std::to_string(i);
        x = tape.add(tape.matmul(x, p[params.store.index(prefix + ".weight")]),
                     p[params.store.index(prefix + ".bias")]);
        if (i + 1 < layers) x = tape.relu(x);
    }
    return {x, tape.softmax_rows(x)};
}

std::vector<NodeId> bind_params(Tape& tape, const DecoderParams& params) {
    std::vector<NodeId> p;
    p.reserve(params.store.size());
    for (const Matrix& m : params.store.values()) p.push_back(tape.parameter(m));
    return p;
}

}  // namespace

PredictionOutput mlp_head(const Matrix& h_align, const DecoderParams& params) {
    Tape tape;
    const auto p = bind_params(tape, params);
    const NodeId h = tape.parameter(h_align);
    const auto [logits, probs] = record_head(tape, h, params, p);
    PredictionOutput out;
    out.logits = tape.value(logits);
    out.p_success = tape.value(probs)(0, 1);
    out.h_align = h_align;
    return out;
}

Matrix compute_diff(const representation::LambdaRepresentation& after,
                    const representation::LambdaRepresentation& before, const DecoderParams& params) {
    check_structure(after.raw, before.raw);
    Tape tape;
    const AttentionNodes w = constant_nodes(tape, params.diff_attention());
    return tape.value(record_block(tape, tape.parameter(after.tokens), tape.parameter(before.tokens), w,
                                   AttentionMode::cross, params.config));
}

Matrix compute_align(const Matrix& h_diff, const representation::LanguageFeature& language,
                     const DecoderParams& params) {
    if (language.tokens.rows() == 0) throw EmptyKeysError("empty language feature");
    Tape tape;
    const AttentionNodes w = constant_nodes(tape, params.align_attention());
    return tape.value(record_block(tape, tape.parameter(h_diff), tape.parameter(language.tokens), w,
                                   AttentionMode::cross, params.config));
}

ForwardNodes record_forward(Tape& tape, const EpisodeFeatures& features, const DecoderParams& params,
                            AttentionMode mode) {
    check_structure(features.after, features.before);
    if (features.after.token_count() == 0) throw EmptyRepresentationError("no image tokens");
    if (features.language.empty()) throw EmptyKeysError("empty language feature");
    ForwardNodes n;
    n.params = bind_params(tape, params);
    const NodeId after = record_tokens(tape, features.after.blocks, params, n.params);
    const NodeId before = record_tokens(tape, features.before.blocks, params, n.params);
    const NodeId language = record_tokens(tape, features.language, params, n.params);
    n.h_diff = record_block(tape, after, before, diff_nodes(params, n.params), mode, params.config);
    n.h_align = record_block(tape, n.h_diff, language, align_nodes(params, n.params), mode, params.config);
    std::tie(n.logits, n.probs) = record_head(tape, n.h_align, params, n.params);
    return n;
}

PredictionOutput forward(const EpisodeFeatures& features, const DecoderParams& params, AttentionMode mode) {
    Tape tape;
    const ForwardNodes n = record_forward(tape, features, params, mode);
    PredictionOutput out;
    out.logits = tape.value(n.logits);
    out.p_success = tape.value(n.probs)(0, 1);
    out.h_diff = tape.value(n.h_diff);
    out.h_align = tape.value(n.h_align);
    return out;
}

LossAndGrad loss_and_grad(const EpisodeFeatures& features, int label, const DecoderParams& params,
                          AttentionMode mode) {
    if (label != 0 && label != 1) throw ConfigError("label must be 0 or 1");
    Tape tape;
    const ForwardNodes n = record_forward(tape, features, params, mode);
    const NodeId loss = tape.nll(n.probs, static_cast<std::size_t>(label), params.config.prob_epsilon);
    tape.backward(loss);
    LossAndGrad out;
    out.loss = tape.value(loss)(0, 0);
    out.p_success = tape.value(n.probs)(0, 1);
    out.grads.reserve(n.params.size());
    for (NodeId id : n.params) out.grads.push_back(tape.grad(id));
    return out;
}

double loss_only(const EpisodeFeatures& features, int label, const DecoderParams& params, AttentionMode mode) {
    if (label != 0 && label != 1) throw ConfigError("label must be 0 or 1");
    Tape tape;
    const ForwardNodes n = record_forward(tape, features, params, mode);
    return tape.value(tape.nll(n.probs, static_cast<std::size_t>(label), params.config.prob_epsilon))(0, 0);
}

}  // namespace lrep::decoder
