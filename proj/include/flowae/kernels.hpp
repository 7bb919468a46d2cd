#pragma once

#include "flowae/matrix.hpp"

#include <span>

// Dense kernels behind the network. The OpenMP versions split work so that
// every output element is produced by one thread with a fixed summation
// order, so they are bit-identical to the serial references in
// kernels::reference for any thread count.

namespace flowae::kernels {

/// out(r, o) = bias[o] + sum_k in(r, k) * weights(o, k).
void affine_forward(const Matrix& in, const Matrix& weights, std::span<const double> bias, Matrix& out);

/// weight_grad(o, k) = sum_r delta(r, o) * in(r, k); bias_grad[o] = sum_r delta(r, o).
void affine_weight_grad(const Matrix& delta, const Matrix& in, Matrix& weight_grad, std::span<double> bias_grad);

/// in_grad(r, k) = sum_o delta(r, o) * weights(o, k).
void affine_input_grad(const Matrix& delta, const Matrix& weights, Matrix& in_grad);

namespace reference {

void affine_forward(const Matrix& in, const Matrix& weights, std::span<const double> bias, Matrix& out);
void affine_weight_grad(const Matrix& delta, const Matrix& in, Matrix& weight_grad, std::span<double> bias_grad);
void affine_input_grad(const Matrix& delta, const Matrix& weights, Matrix& in_grad);

}  // namespace reference
}  // namespace flowae::kernels
