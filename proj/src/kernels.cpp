#include "flowae/kernels.hpp"

#include <cstddef>
#include <cstdint>

namespace flowae::kernels {
namespace {

constexpr std::int64_t kParallelWork = 1 << 14;

inline void forward_row(const Matrix& in, const Matrix& weights, std::span<const double> bias,
                        Matrix& out, std::size_t r) {
    const std::size_t n_in = in.cols();
    const double* x = in.row(r).data();
    double* z = out.row(r).data();
    for (std::size_t o = 0; o < weights.rows(); ++o) {
        const double* w = weights.row(o).data();
        double acc = bias[o];
        for (std::size_t k = 0; k < n_in; ++k) acc += x[k] * w[k];
        z[o] = acc;
    }
}

inline void weight_grad_row(const Matrix& delta, const Matrix& in, Matrix& weight_grad,
                            std::span<double> bias_grad, std::size_t o) {
    const std::size_t n_in = in.cols();
    double* g = weight_grad.row(o).data();
    for (std::size_t k = 0; k < n_in; ++k) g[k] = 0.0;
    double gb = 0.0;
    for (std::size_t r = 0; r < delta.rows(); ++r) {
        const double d = delta(r, o);
        gb += d;
        const double* x = in.row(r).data();
        for (std::size_t k = 0; k < n_in; ++k) g[k] += d * x[k];
    }
    bias_grad[o] = gb;
}

inline void input_grad_row(const Matrix& delta, const Matrix& weights, Matrix& in_grad, std::size_t r) {
    const std::size_t n_in = weights.cols();
    double* g = in_grad.row(r).data();
    for (std::size_t k = 0; k < n_in; ++k) g[k] = 0.0;
    const double* d = delta.row(r).data();
    for (std::size_t o = 0; o < weights.rows(); ++o) {
        const double* w = weights.row(o).data();
        const double dro = d[o];
        for (std::size_t k = 0; k < n_in; ++k) g[k] += dro * w[k];
    }
}

}  // namespace

void affine_forward(const Matrix& in, const Matrix& weights, std::span<const double> bias, Matrix& out) {
    const auto rows = static_cast<std::int64_t>(in.rows());
    const auto work = rows * static_cast<std::int64_t>(weights.size());
#pragma omp parallel for schedule(static) if (work > kParallelWork)
    for (std::int64_t r = 0; r < rows; ++r) {
        forward_row(in, weights, bias, out, static_cast<std::size_t>(r));
    }
}

void affine_weight_grad(const Matrix& delta, const Matrix& in, Matrix& weight_grad, std::span<double> bias_grad) {
    const auto outs = static_cast<std::int64_t>(weight_grad.rows());
    const auto work = static_cast<std::int64_t>(delta.rows()) * static_cast<std::int64_t>(weight_grad.size());
#pragma omp parallel for schedule(static) if (work > kParallelWork)
    for (std::int64_t o = 0; o < outs; ++o) {
        weight_grad_row(delta, in, weight_grad, bias_grad, static_cast<std::size_t>(o));
    }
}

void affine_input_grad(const Matrix& delta, const Matrix& weights, Matrix& in_grad) {
    const auto rows = static_cast<std::int64_t>(delta.rows());
    const auto work = rows * static_cast<std::int64_t>(weights.size());
#pragma omp parallel for schedule(static) if (work > kParallelWork)
    for (std::int64_t r = 0; r < rows; ++r) {
        input_grad_row(delta, weights, in_grad, static_cast<std::size_t>(r));
    }
}

namespace reference {

void affine_forward(const Matrix& in, const Matrix& weights, std::span<const double> bias, Matrix& out) {
    for (std::size_t r = 0; r < in.rows(); ++r) {
        for (std::size_t o = 0; o < weights.rows(); ++o) {
            double acc = bias[o];
            for (std::size_t k = 0; k < in.cols(); ++k) acc += in(r, k) * weights(o, k);
            out(r, o) = acc;
        }
    }
}

void affine_weight_grad(const Matrix& delta, const Matrix& in, Matrix& weight_grad, std::span<double> bias_grad) {
    for (std::size_t o = 0; o < weight_grad.rows(); ++o) {
        bias_grad[o] = 0.0;
        for (std::size_t k = 0; k < weight_grad.cols(); ++k) weight_grad(o, k) = 0.0;
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            bias_grad[o] += delta(r, o);
            for (std::size_t k = 0; k < weight_grad.cols(); ++k) weight_grad(o, k) += delta(r, o) * in(r, k);
        }
    }
}

void affine_input_grad(const Matrix& delta, const Matrix& weights, Matrix& in_grad) {
    for (std::size_t r = 0; r < delta.rows(); ++r) {
        for (std::size_t k = 0; k < weights.cols(); ++k) in_grad(r, k) = 0.0;
        for (std::size_t o = 0; o < weights.rows(); ++o) {
            for (std::size_t k = 0; k < weights.cols(); ++k) in_grad(r, k) += delta(r, o) * weights(o, k);
        }
    }
}

}  // namespace reference
}  // namespace flowae::kernels
