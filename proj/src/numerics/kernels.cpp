#include "lrep/numerics/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "lrep/errors.hpp"

namespace lrep::numerics {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

void require_finite(const Matrix& m, const char* op) {
    if (!m.all_finite()) throw NumericError(std::string(op) + ": non-finite input");
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ, " + a.shape_string() + " * " +
                         b.shape_string());
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Matrix out(n, m);
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (std::size_t i = 0; i < n; ++i) {
        double* out_row = out.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            if (av == 0.0) continue;
            const double* b_row = b.row(p).data();
            for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
        }
    }
    return out;
}

BinaryGrad matmul_backward(const Matrix& a, const Matrix& b, const Matrix& grad_out) {
    if (grad_out.rows() != a.rows() || grad_out.cols() != b.cols()) {
        throw ShapeError("matmul_backward: grad " + grad_out.shape_string() +
                         " does not match output " + std::to_string(a.rows()) + "x" +
                         std::to_string(b.cols()));
    }
    return {matmul(grad_out, transpose(b)), matmul(transpose(a), grad_out)};
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    accumulate(out, b);
    return out;
}

Matrix scale(const Matrix& m, double factor) {
    Matrix out = m;
    for (double& x : out.data()) x *= factor;
    return out;
}

void accumulate(Matrix& dst, const Matrix& src) {
    require_same_shape(dst, src, "accumulate");
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Matrix concat_rows(std::span<const Matrix* const> parts) {
    if (parts.empty()) return {};
    const std::size_t cols = parts.front()->cols();
    std::size_t rows = 0;
    for (const Matrix* p : parts) {
        if (p->cols() != cols) {
            throw ShapeError("concat_rows: column count " + std::to_string(p->cols()) +
                             " differs from " + std::to_string(cols));
        }
        rows += p->rows();
    }
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const Matrix* p : parts) data.insert(data.end(), p->data().begin(), p->data().end());
    return Matrix(rows, cols, std::move(data));
}

Matrix concat_cols(std::span<const Matrix* const> parts) {
    if (parts.empty()) return {};
    const std::size_t rows = parts.front()->rows();
    std::size_t cols = 0;
    for (const Matrix* p : parts) {
        if (p->rows() != rows) {
            throw ShapeError("concat_cols: row count " + std::to_string(p->rows()) +
                             " differs from " + std::to_string(rows));
        }
        cols += p->cols();
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const Matrix* p : parts) {
        for (std::size_t i = 0; i < rows; ++i)
            std::copy(p->row(i).begin(), p->row(i).end(), out.row(i).begin() + offset);
        offset += p->cols();
    }
    return out;
}

Matrix slice(const Matrix& m, std::size_t row0, std::size_t rows, std::size_t col0,
             std::size_t cols) {
    if (row0 + rows > m.rows() || col0 + cols > m.cols()) {
        throw ShapeError("slice: window exceeds " + m.shape_string());
    }
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out(i, j) = m(row0 + i, col0 + j);
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    require_finite(m, "softmax_rows");
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto in = m.row(i);
        auto o = out.row(i);
        const double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (double& x : o) x /= sum;
    }
    return out;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& grad_out) {
    require_same_shape(y, grad_out, "softmax_rows_backward");
    Matrix g(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < y.cols(); ++j) dot += y(i, j) * grad_out(i, j);
        for (std::size_t j = 0; j < y.cols(); ++j) g(i, j) = y(i, j) * (grad_out(i, j) - dot);
    }
    return g;
}

Matrix relu(const Matrix& m) {
    Matrix out = m;
    for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
    return out;
}

Matrix relu_backward(const Matrix& x, const Matrix& grad_out) {
    require_same_shape(x, grad_out, "relu_backward");
    Matrix g = grad_out;
    auto xs = x.data();
    auto gs = g.data();
    for (std::size_t i = 0; i < gs.size(); ++i)
        if (!(xs[i] > 0.0)) gs[i] = 0.0;
    return g;
}

Matrix mean_rows(const Matrix& m) {
    if (m.rows() == 0) throw ShapeError("mean_rows: empty input");
    Matrix out(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) += m(i, j);
    const double inv = 1.0 / static_cast<double>(m.rows());
    for (double& x : out.data()) x *= inv;
    return out;
}

Matrix mean_rows_backward(std::size_t rows, const Matrix& grad_out) {
    if (grad_out.rows() != 1) throw ShapeError("mean_rows_backward: grad must be one row");
    Matrix g(rows, grad_out.cols());
    const double inv = 1.0 / static_cast<double>(rows);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < grad_out.cols(); ++j) g(i, j) = grad_out(0, j) * inv;
    return g;
}

Matrix layer_norm_rows(const Matrix& m, double eps) {
    Matrix out(m.rows(), m.cols());
    const double n = static_cast<double>(m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto x = m.row(i);
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        var /= n;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < x.size(); ++j) out(i, j) = (x[j] - mean) * inv_std;
    }
    return out;
}

Matrix layer_norm_rows_backward(const Matrix& x, const Matrix& grad_out, double eps) {
    require_same_shape(x, grad_out, "layer_norm_rows_backward");
    const Matrix y = layer_norm_rows(x, eps);
    Matrix g(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto xr = x.row(i);
        double mean = 0.0;
        for (double v : xr) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : xr) var += (v - mean) * (v - mean);
        var /= n;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        double sum_g = 0.0, sum_gy = 0.0;
        for (std::size_t j = 0; j < xr.size(); ++j) {
            sum_g += grad_out(i, j);
            sum_gy += grad_out(i, j) * y(i, j);
        }
        for (std::size_t j = 0; j < xr.size(); ++j)
            g(i, j) = inv_std * (grad_out(i, j) - sum_g / n - y(i, j) * sum_gy / n);
    }
    return g;
}

double cross_entropy(double prob_true_class, double eps) {
    if (!(prob_true_class >= 0.0 && prob_true_class <= 1.0)) {
        throw NumericError("cross_entropy: probability " + std::to_string(prob_true_class) +
                           " outside [0, 1]");
    }
    return -std::log(std::clamp(prob_true_class, eps, 1.0 - eps));
}

}  // namespace lrep::numerics
