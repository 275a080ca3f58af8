#pragma once

#include <cstddef>
#include <span>

#include "lrep/numerics/matrix.hpp"

// Pure forward/backward kernels. Every backward takes the upstream gradient
// `grad_out` (same shape as the forward output) and returns gradients with the
// shapes of the forward inputs.

namespace lrep::numerics {

struct BinaryGrad {
    Matrix a;
    Matrix b;
};

Matrix matmul(const Matrix& a, const Matrix& b);
BinaryGrad matmul_backward(const Matrix& a, const Matrix& b, const Matrix& grad_out);

Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);

/// In-place `dst += src`; shapes must match.
void accumulate(Matrix& dst, const Matrix& src);

Matrix concat_rows(std::span<const Matrix* const> parts);
Matrix concat_cols(std::span<const Matrix* const> parts);

/// Rows [row0, row0+rows) and columns [col0, col0+cols).
Matrix slice(const Matrix& m, std::size_t row0, std::size_t rows, std::size_t col0,
             std::size_t cols);

/// Row-wise softmax, stabilized by subtracting each row's maximum.
Matrix softmax_rows(const Matrix& m);
/// Jacobian-vector product of softmax_rows given its output `y`.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& grad_out);

Matrix relu(const Matrix& m);
Matrix relu_backward(const Matrix& x, const Matrix& grad_out);

/// Column means: (r x c) -> (1 x c).
Matrix mean_rows(const Matrix& m);
Matrix mean_rows_backward(std::size_t rows, const Matrix& grad_out);

/// Per-row standardization (x - mean) / sqrt(var + eps), no affine parameters.
Matrix layer_norm_rows(const Matrix& m, double eps);
Matrix layer_norm_rows_backward(const Matrix& x, const Matrix& grad_out, double eps);

inline constexpr double kProbabilityEpsilon = 1e-12;

/// Clamps `p` to [eps, 1 - eps] and returns -ln(p).
double cross_entropy(double prob_true_class, double eps = kProbabilityEpsilon);

}  // namespace lrep::numerics
