#include "lrep/numerics/tape.hpp"

#include <algorithm>
#include <cmath>

#include "lrep/errors.hpp"
#include "lrep/numerics/kernels.hpp"

namespace lrep::numerics {

NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

bool Tape::any_requires_grad(std::span<const NodeId> ids) const {
    return std::any_of(ids.begin(), ids.end(), [&](NodeId id) { return nodes_.at(id).requires_grad; });
}

NodeId Tape::constant(Matrix value) {
    Node n;
    n.owned = std::move(value);
    return push(std::move(n));
}

NodeId Tape::variable(Matrix value) {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

NodeId Tape::parameter(const Matrix& value) {
    Node n;
    n.external = &value;
    n.requires_grad = true;
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = OpKind::matmul;
    n.inputs = {a, b};
    n.owned = numerics::matmul(value(a), value(b));
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    Node n;
    n.op = OpKind::add;
    n.inputs = {a, b};
    n.owned = numerics::add(value(a), value(b));
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
    Node n;
    n.op = OpKind::scale;
    n.inputs = {a};
    n.factor = factor;
    n.owned = numerics::scale(value(a), factor);
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::concat_rows(std::span<const NodeId> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    std::vector<const Matrix*> values;
    for (NodeId id : parts) values.push_back(&value(id));
    Node n;
    n.op = OpKind::concat_rows;
    n.inputs.assign(parts.begin(), parts.end());
    n.owned = numerics::concat_rows(values);
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::concat_cols(std::span<const NodeId> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    std::vector<const Matrix*> values;
    for (NodeId id : parts) values.push_back(&value(id));
    Node n;
    n.op = OpKind::concat_cols;
    n.inputs.assign(parts.begin(), parts.end());
    n.owned = numerics::concat_cols(values);
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::slice(NodeId a, std::size_t row0, std::size_t rows, std::size_t col0,
                   std::size_t cols) {
    Node n;
    n.op = OpKind::slice;
    n.inputs = {a};
    n.window[0] = row0;
    n.window[1] = rows;
    n.window[2] = col0;
    n.window[3] = cols;
    n.owned = numerics::slice(value(a), row0, rows, col0, cols);
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::softmax_rows(NodeId a) {
    Node n;
    n.op = OpKind::softmax_rows;
    n.inputs = {a};
    n.owned = numerics::softmax_rows(value(a));
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
    Node n;
    n.op = OpKind::relu;
    n.inputs = {a};
    n.owned = numerics::relu(value(a));
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::transpose(NodeId a) {
    Node n;
    n.op = OpKind::transpose;
    n.inputs = {a};
    n.owned = numerics::transpose(value(a));
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::mean_rows(NodeId a) {
    Node n;
    n.op = OpKind::mean_rows;
    n.inputs = {a};
    n.owned = numerics::mean_rows(value(a));
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::layer_norm(NodeId a, double eps) {
    Node n;
    n.op = OpKind::layer_norm;
    n.inputs = {a};
    n.factor = eps;
    n.owned = numerics::layer_norm_rows(value(a), eps);
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

NodeId Tape::nll(NodeId probs, std::size_t label, double eps) {
    const Matrix& p = value(probs);
    if (p.rows() != 1 || label >= p.cols()) {
        throw ShapeError("nll: expected one probability row with column " + std::to_string(label) +
                         ", got " + p.shape_string());
    }
    Node n;
    n.op = OpKind::nll;
    n.inputs = {probs};
    n.label = label;
    n.factor = eps;
    n.owned = Matrix(1, 1, cross_entropy(p(0, label), eps));
    n.requires_grad = any_requires_grad(n.inputs);
    return push(std::move(n));
}

const Matrix& Tape::value(NodeId id) const { return val(nodes_.at(id)); }

Matrix Tape::grad(NodeId id) const {
    const Node& n = nodes_.at(id);
    if (n.grad.empty()) return Matrix(val(n).rows(), val(n).cols());
    return n.grad;
}

const Matrix* Tape::grad_if_reached(NodeId id) const {
    const Node& n = nodes_.at(id);
    return n.grad.empty() ? nullptr : &n.grad;
}

void Tape::add_grad(NodeId id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) {
        n.grad = g;
    } else {
        accumulate(n.grad, g);
    }
}

void Tape::backward(NodeId root) {
    const Matrix& r = value(root);
    if (r.rows() != 1 || r.cols() != 1) {
        throw ShapeError("backward: root must be 1x1, got " + r.shape_string());
    }
    for (Node& n : nodes_) n.grad = Matrix();
    nodes_[root].grad = Matrix(1, 1, 1.0);

    for (NodeId id = root + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.op == OpKind::leaf || n.grad.empty() || !n.requires_grad) continue;
        const Matrix g = n.grad;
        const auto& in = n.inputs;
        switch (n.op) {
            case OpKind::matmul: {
                const Matrix& a = value(in[0]);
                const Matrix& b = value(in[1]);
                if (nodes_[in[0]].requires_grad) add_grad(in[0], numerics::matmul(g, numerics::transpose(b)));
                if (nodes_[in[1]].requires_grad) add_grad(in[1], numerics::matmul(numerics::transpose(a), g));
                break;
            }
            case OpKind::add:
                add_grad(in[0], g);
                add_grad(in[1], g);
                break;
            case OpKind::scale:
                add_grad(in[0], numerics::scale(g, n.factor));
                break;
            case OpKind::concat_rows: {
                std::size_t row = 0;
                for (NodeId part : in) {
                    const Matrix& v = value(part);
                    if (nodes_[part].requires_grad)
                        add_grad(part, numerics::slice(g, row, v.rows(), 0, v.cols()));
                    row += v.rows();
                }
                break;
            }
            case OpKind::concat_cols: {
                std::size_t col = 0;
                for (NodeId part : in) {
                    const Matrix& v = value(part);
                    if (nodes_[part].requires_grad)
                        add_grad(part, numerics::slice(g, 0, v.rows(), col, v.cols()));
                    col += v.cols();
                }
                break;
            }
            case OpKind::slice: {
                const Matrix& src = value(in[0]);
                Matrix full(src.rows(), src.cols());
                for (std::size_t i = 0; i < n.window[1]; ++i)
                    for (std::size_t j = 0; j < n.window[3]; ++j)
                        full(n.window[0] + i, n.window[2] + j) = g(i, j);
                add_grad(in[0], full);
                break;
            }
            case OpKind::softmax_rows:
                add_grad(in[0], softmax_rows_backward(n.owned, g));
                break;
            case OpKind::relu:
                add_grad(in[0], relu_backward(value(in[0]), g));
                break;
            case OpKind::transpose:
                add_grad(in[0], numerics::transpose(g));
                break;
            case OpKind::mean_rows:
                add_grad(in[0], mean_rows_backward(value(in[0]).rows(), g));
                break;
            case OpKind::layer_norm:
                add_grad(in[0], layer_norm_rows_backward(value(in[0]), g, n.factor));
                break;
            case OpKind::nll: {
                const Matrix& p = value(in[0]);
                Matrix gp(1, p.cols());
                const double prob = p(0, n.label);
                // Zero gradient where the clamp is active.
                if (prob > n.factor && prob < 1.0 - n.factor) gp(0, n.label) = -g(0, 0) / prob;
                add_grad(in[0], gp);
                break;
            }
            case OpKind::leaf:
                break;
        }
    }
}

}  // namespace lrep::numerics
