#include "flowae/neural_core.hpp"

#include "flowae/error.hpp"
#include "flowae/kernels.hpp"
#include "flowae/rng.hpp"

#include <cmath>
#include <string>

namespace flowae {

void TrainConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw UsageError(std::string(name) + " must be positive");
    };
    positive(learning_rate, "learning_rate");
    positive(adam_epsilon, "adam_epsilon");
    positive(huber_delta, "huber_delta");
    positive(clip_max_norm, "clip_max_norm");
    positive(min_lr, "min_lr");
    if (weight_decay < 0.0) throw UsageError("weight_decay must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw UsageError("adam betas must be in [0, 1)");
    }
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw UsageError("plateau_factor must be in (0, 1)");
    if (batch_size == 0) throw UsageError("batch_size must be positive");
    if (max_epochs <= 0 || plateau_patience <= 0 || early_stop_patience <= 0) {
        throw UsageError("epochs and patiences must be positive");
    }
    if (improvement_threshold < 0.0) throw UsageError("improvement_threshold must be >= 0");
    if (!(slope > 0.0 && slope < 1.0)) throw UsageError("slope must be in (0, 1)");
}

double leaky_relu(double x, double slope) { return std::max(slope * x, x); }

std::vector<double> leaky_relu(std::span<const double> x, double slope) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = leaky_relu(x[i], slope);
    return out;
}

double leaky_relu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

namespace {

double huber_term(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

void check_chain(std::span<const DenseLayer> layers, std::size_t in_cols) {
    std::size_t width = in_cols;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].in_dim() != width) {
            throw DataError("shape mismatch at layer " + std::to_string(l) + ": expects " +
                            std::to_string(layers[l].in_dim()) + " inputs, got " + std::to_string(width));
        }
        width = layers[l].out_dim();
    }
}

void activate_in_place(Matrix& m, double slope) {
    for (double& v : m.data()) v = leaky_relu(v, slope);
}

}  // namespace

double huber_loss(std::span<const double> y, std::span<const double> yhat, double delta) {
    if (y.size() != yhat.size()) throw DataError("huber_loss: length mismatch");
    if (y.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += huber_term(y[i] - yhat[i], delta);
    return sum / static_cast<double>(y.size());
}

double huber_loss(const Matrix& y, const Matrix& yhat, double delta) {
    if (y.rows() != yhat.rows() || y.cols() != yhat.cols()) throw DataError("huber_loss: shape mismatch");
    return huber_loss(std::span<const double>(y.data()), std::span<const double>(yhat.data()), delta);
}

Matrix huber_gradient(const Matrix& y, const Matrix& yhat, double delta) {
    if (y.rows() != yhat.rows() || y.cols() != yhat.cols()) throw DataError("huber_gradient: shape mismatch");
    Matrix g(yhat.rows(), yhat.cols());
    const double inv_n = 1.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y.data()[i] - yhat.data()[i];
        const double d = std::abs(r) <= delta ? r : (r > 0.0 ? delta : -delta);
        g.data()[i] = -d * inv_n;
    }
    return g;
}

Matrix forward(std::span<const DenseLayer> layers, double slope, const Matrix& x) {
    check_chain(layers, x.cols());
    Matrix current = x;
    for (const auto& layer : layers) {
        Matrix next(current.rows(), layer.out_dim());
        kernels::affine_forward(current, layer.weights, layer.bias, next);
        if (layer.activated) activate_in_place(next, slope);
        current = std::move(next);
    }
    return current;
}

ForwardCache forward_cached(std::span<const DenseLayer> layers, double slope, const Matrix& x) {
    check_chain(layers, x.cols());
    ForwardCache cache;
    Matrix current = x;
    for (const auto& layer : layers) {
        Matrix z(current.rows(), layer.out_dim());
        kernels::affine_forward(current, layer.weights, layer.bias, z);
        cache.inputs.push_back(std::move(current));
        current = z;
        if (layer.activated) activate_in_place(current, slope);
        cache.pre_activations.push_back(std::move(z));
        cache.generations.push_back(layer.generation);
    }
    cache.output = std::move(current);
    return cache;
}

double Gradients::global_norm() const {
    double sq = 0.0;
    for (const auto& w : weights) {
        for (double v : w.data()) sq += v * v;
    }
    for (const auto& b : bias) {
        for (double v : b) sq += v * v;
    }
    return std::sqrt(sq);
}

void Gradients::scale(double factor) {
    for (auto& w : weights) {
        for (double& v : w.data()) v *= factor;
    }
    for (auto& b : bias) {
        for (double& v : b) v *= factor;
    }
}

Gradients backward(std::span<const DenseLayer> layers, double slope, const ForwardCache& cache,
                   const Matrix& output_grad) {
    if (cache.generations.size() != layers.size()) throw UsageError("stale forward cache: layer count differs");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (cache.generations[l] != layers[l].generation) {
            throw UsageError("stale forward cache: layer " + std::to_string(l) + " was updated after forward");
        }
    }
    if (output_grad.rows() != cache.output.rows() || output_grad.cols() != cache.output.cols()) {
        throw DataError("output gradient shape does not match forward output");
    }

    Gradients grads;
    grads.weights.resize(layers.size());
    grads.bias.resize(layers.size());
    Matrix delta = output_grad;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& layer = layers[li];
        if (layer.activated) {
            const auto& z = cache.pre_activations[li];
            for (std::size_t i = 0; i < delta.size(); ++i) delta.data()[i] *= leaky_relu_grad(z.data()[i], slope);
        }
        grads.weights[li] = Matrix(layer.out_dim(), layer.in_dim());
        grads.bias[li].assign(layer.out_dim(), 0.0);
        kernels::affine_weight_grad(delta, cache.inputs[li], grads.weights[li], grads.bias[li]);
        if (li > 0) {
            Matrix prev(delta.rows(), layer.in_dim());
            kernels::affine_input_grad(delta, layer.weights, prev);
            delta = std::move(prev);
        }
    }
    return grads;
}

double clip_global_norm(Gradients& gradients, double max_norm) {
    const double norm = gradients.global_norm();
    if (norm > max_norm && norm > 0.0) gradients.scale(max_norm / norm);
    return norm;
}

void adam_step(std::span<DenseLayer> layers, const Gradients& gradients, const TrainConfig& config,
               std::int64_t step_count, double learning_rate) {
    if (step_count < 1) throw UsageError("adam step count starts at 1");
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double t = static_cast<double>(step_count);
    const double correction1 = 1.0 - std::pow(b1, t);
    const double correction2 = 1.0 - std::pow(b2, t);
    const double eps = config.adam_epsilon;

    auto update = [&](double& param, double grad, double& m, double& v) {
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad * grad;
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        param -= learning_rate * m_hat / (std::sqrt(v_hat) + eps);
    };

    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto& layer = layers[l];
        if (layer.m_weights.size() != layer.weights.size()) {
            layer.m_weights = Matrix(layer.out_dim(), layer.in_dim());
            layer.v_weights = Matrix(layer.out_dim(), layer.in_dim());
        }
        if (layer.m_bias.size() != layer.bias.size()) {
            layer.m_bias.assign(layer.bias.size(), 0.0);
            layer.v_bias.assign(layer.bias.size(), 0.0);
        }
        auto& w = layer.weights.data();
        const auto& gw = gradients.weights[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            double g = gw[i];
            if (!config.decoupled_weight_decay) g += config.weight_decay * w[i];
            else w[i] -= learning_rate * config.weight_decay * w[i];
            update(w[i], g, layer.m_weights.data()[i], layer.v_weights.data()[i]);
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            update(layer.bias[i], gradients.bias[l][i], layer.m_bias[i], layer.v_bias[i]);
        }
        ++layer.generation;
    }
}

std::vector<DenseLayer> init_layers(std::span<const std::size_t> dims, double slope, std::uint64_t seed,
                                    std::vector<bool> activate) {
    if (dims.size() < 2) throw UsageError("init_layers needs at least 2 dimensions");
    for (auto d : dims) {
        if (d < 1) throw UsageError("layer dimensions must be >= 1");
    }
    if (activate.empty()) activate.assign(dims.size() - 1, true);
    if (activate.size() != dims.size() - 1) throw UsageError("activation plan length must equal layer count");
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto fan_in = dims[l];
        const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * static_cast<double>(fan_in)));
        DenseLayer layer;
        layer.weights = Matrix(dims[l + 1], fan_in);
        for (double& w : layer.weights.data()) w = rng.uniform(-bound, bound);
        layer.bias.assign(dims[l + 1], 0.0);
        layer.activated = activate[l];
        layer.m_weights = Matrix(dims[l + 1], fan_in);
        layer.v_weights = Matrix(dims[l + 1], fan_in);
        layer.m_bias.assign(dims[l + 1], 0.0);
        layer.v_bias.assign(dims[l + 1], 0.0);
        layers.push_back(std::move(layer));
    }
    return layers;
}

}  // namespace flowae
