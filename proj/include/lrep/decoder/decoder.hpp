#pragma once

#include <cstddef>
#include <vector>

#include "lrep/decoder/params.hpp"
#include "lrep/numerics/matrix.hpp"
#include "lrep/numerics/tape.hpp"
#include "lrep/representation/assembly.hpp"

namespace lrep::decoder {

using numerics::NodeId;
using numerics::Tape;

/// softmax((x_a W_q)(x_b W_k)^T / sqrt(d_k)) (x_b W_v), per head, heads
/// concatenated along columns. Throws EmptyKeysError when x_b has no rows.
Matrix cross_attention(const Matrix& x_a, const Matrix& x_b, const AttentionWeights& w);
/// cross_attention(x, x, w).
Matrix self_attention(const Matrix& x, const AttentionWeights& w);
/// Row-stochastic attention weights of the first head.
Matrix attention_weights(const Matrix& x_a, const Matrix& x_b, const AttentionWeights& w);

/// Tape versions; the weight arguments are node ids already on `tape`.
struct AttentionNodes {
    NodeId w_q;
    NodeId w_k;
    NodeId w_v;
    std::size_t heads = 1;
};
NodeId cross_attention(Tape& tape, NodeId x_a, NodeId x_b, const AttentionNodes& w);
/// Attention over concat_rows(x_a, x_b), keeping the first rows(x_a) rows.
NodeId concat_self_attention(Tape& tape, NodeId x_a, NodeId x_b, const AttentionNodes& w);

struct PredictionOutput {
    Matrix logits;  // 1 x 2
    double p_success = 0.0;
    Matrix h_diff;
    Matrix h_align;
};

/// Pools h_align and runs the MLP. Throws ShapeError on an empty h_align.
PredictionOutput mlp_head(const Matrix& h_align, const DecoderParams& params);

/// Difference (queries from after, keys/values from before).
Matrix compute_diff(const representation::LambdaRepresentation& after,
                    const representation::LambdaRepresentation& before, const DecoderParams& params);
/// Alignment (queries from h_diff, keys/values from the language feature).
Matrix compute_align(const Matrix& h_diff, const representation::LanguageFeature& language,
                     const DecoderParams& params);

/// Graph handles for one episode recorded on a tape.
struct ForwardNodes {
    std::vector<NodeId> params;  // one per ParameterStore entry
    NodeId h_diff;
    NodeId h_align;
    NodeId logits;
    NodeId probs;
};

ForwardNodes record_forward(Tape& tape, const representation::EpisodeFeatures& features,
                            const DecoderParams& params, AttentionMode mode);

PredictionOutput forward(const representation::EpisodeFeatures& features, const DecoderParams& params,
                         AttentionMode mode);

struct LossAndGrad {
    double loss = 0.0;
    double p_success = 0.0;
    std::vector<Matrix> grads;  // aligned with params.store
};

/// Cross-entropy of the 2-class head against `label` (0 or 1) and its
/// gradient with respect to every parameter.
LossAndGrad loss_and_grad(const representation::EpisodeFeatures& features, int label,
                          const DecoderParams& params, AttentionMode mode);

double loss_only(const representation::EpisodeFeatures& features, int label, const DecoderParams& params,
                 AttentionMode mode);

}  // namespace lrep::decoder
