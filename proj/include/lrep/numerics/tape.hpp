#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lrep/numerics/matrix.hpp"

namespace lrep::numerics {

using NodeId = std::size_t;

enum class OpKind {
    leaf,
    matmul,
    add,
    scale,
    concat_rows,
    concat_cols,
    slice,
    softmax_rows,
    relu,
    transpose,
    mean_rows,
    layer_norm,
    nll,
};

/// Reverse-mode tape over a fixed set of matrix primitives.
///
/// Nodes are appended in evaluation order, so the recording order is already a
/// topological order and `backward` just walks it in reverse. Parameters are
/// referenced, not copied: the referenced matrix must outlive the tape and must
/// not change while the tape is alive. A tape is single-owner.
class Tape {
public:
    NodeId constant(Matrix value);
    NodeId variable(Matrix value);
    NodeId parameter(const Matrix& value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId scale(NodeId a, double factor);
    NodeId concat_rows(std::span<const NodeId> parts);
    NodeId concat_cols(std::span<const NodeId> parts);
    NodeId slice(NodeId a, std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols);
    NodeId softmax_rows(NodeId a);
    NodeId relu(NodeId a);
    NodeId transpose(NodeId a);
    NodeId mean_rows(NodeId a);
    NodeId layer_norm(NodeId a, double eps);
    /// Negative log of the clamped probability at column `label` of a one-row
    /// probability node; produces a 1x1 loss.
    NodeId nll(NodeId probs, std::size_t label, double eps);

    const Matrix& value(NodeId id) const;
    /// Gradient accumulated by the last `backward`; a zero matrix for nodes the
    /// loss does not depend on.
    Matrix grad(NodeId id) const;
    /// Same as `grad` without the copy; null when backward never reached `id`.
    const Matrix* grad_if_reached(NodeId id) const;
    bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Seeds d(root)/d(root) = 1 and propagates to every node. `root` must be 1x1.
    void backward(NodeId root);

private:
    struct Node {
        OpKind op = OpKind::leaf;
        std::vector<NodeId> inputs;
        Matrix owned;
        const Matrix* external = nullptr;
        Matrix grad;
        bool requires_grad = false;
        double factor = 0.0;
        std::size_t label = 0;
        std::size_t window[4] = {0, 0, 0, 0};
    };

    NodeId push(Node node);
    const Matrix& val(const Node& n) const { return n.external ? *n.external : n.owned; }
    bool any_requires_grad(std::span<const NodeId> ids) const;
    void add_grad(NodeId id, const Matrix& g);

    std::vector<Node> nodes_;
};

}  // namespace lrep::numerics
