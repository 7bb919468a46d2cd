#pragma once

#include "flowae/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flowae {

/// Fully connected layer: out = act(W * in + b). W is out x in.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    bool activated = true;

    // Adam first/second moments, same shapes as the parameters.
    Matrix m_weights, v_weights;
    std::vector<double> m_bias, v_bias;

    /// Bumped on every parameter update; used to reject stale forward caches.
    std::uint64_t generation = 0;

    std::size_t in_dim() const { return weights.cols(); }
    std::size_t out_dim() const { return weights.rows(); }
};

struct TrainConfig {
    double learning_rate = 0.001;
    double weight_decay = 1e-5;
    /// false: decay * W is added to the gradient before the moment update.
    /// true: W is shrunk by lr * decay directly (AdamW style).
    bool decoupled_weight_decay = false;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double huber_delta = 1.0;
    double clip_max_norm = 1.0;
    std::size_t batch_size = 256;
    int max_epochs = 200;
    double plateau_factor = 0.5;
    int plateau_patience = 5;
    int early_stop_patience = 20;
    /// Absolute decrease in test loss that counts as an improvement.
    double improvement_threshold = 1e-6;
    double min_lr = 1e-6;
    double slope = 0.2;
    std::uint64_t seed = 42;

    /// Throws UsageError when a rate, patience or factor is out of range.
    void validate() const;
};

double leaky_relu(double x, double slope);
std::vector<double> leaky_relu(std::span<const double> x, double slope);
/// Derivative; at exactly 0 the negative-side slope is used.
double leaky_relu_grad(double x, double slope);

/// Mean over elements of the Huber loss of r = y - yhat.
double huber_loss(std::span<const double> y, std::span<const double> yhat, double delta);
double huber_loss(const Matrix& y, const Matrix& yhat, double delta);
/// d(mean Huber loss)/d(yhat), same shape as yhat.
Matrix huber_gradient(const Matrix& y, const Matrix& yhat, double delta);

struct ForwardCache {
    std::vector<Matrix> inputs;           // input to each layer
    std::vector<Matrix> pre_activations;  // W * in + b for each layer
    Matrix output;
    std::vector<std::uint64_t> generations;
};

/// Inference only; no cache.
Matrix forward(std::span<const DenseLayer> layers, double slope, const Matrix& x);
ForwardCache forward_cached(std::span<const DenseLayer> layers, double slope, const Matrix& x);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> bias;

    double global_norm() const;
    void scale(double factor);
};

/// Parameter gradients given d(loss)/d(output). Throws if the cache does not
/// belong to the current parameters.
Gradients backward(std::span<const DenseLayer> layers, double slope, const ForwardCache& cache,
                   const Matrix& output_grad);

/// Rescales all gradients together when their joint L2 norm exceeds max_norm.
/// Returns the norm before clipping.
double clip_global_norm(Gradients& gradients, double max_norm);

/// One Adam update with bias correction. Biases are exempt from weight decay.
void adam_step(std::span<DenseLayer> layers, const Gradients& gradients, const TrainConfig& config,
               std::int64_t step_count, double learning_rate);

/// Uniform init in +-sqrt(6 / ((1 + slope^2) * fan_in)), zero biases.
/// `activate` defaults to an activation after every layer.
std::vector<DenseLayer> init_layers(std::span<const std::size_t> dims, double slope, std::uint64_t seed,
                                    std::vector<bool> activate = {});

}  // namespace flowae
