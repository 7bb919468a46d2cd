#pragma once

#include "flowae/flow_data.hpp"
#include "flowae/matrix.hpp"
#include "flowae/neural_core.hpp"
#include "flowae/preprocess.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flowae {

inline constexpr std::size_t kLatentDim = 16;

/// Layer widths 21-128-64-16 (encoder) and 16-64-128-21 (decoder).
inline constexpr std::array<std::size_t, 7> kAutoencoderDims{kNumFeatures, 128, 64, kLatentDim, 64, 128, kNumFeatures};
/// LeakyReLU after every layer except the decoder output, which stays affine.
inline constexpr std::array<bool, 6> kAutoencoderActivations{true, true, true, true, true, false};
inline constexpr std::size_t kEncoderLayers = 3;

struct AutoencoderModel {
    std::vector<DenseLayer> layers;
    double slope = 0.2;
    std::vector<std::string> feature_names;
    std::uint64_t preprocessor_fingerprint = 0;

    std::span<const DenseLayer> encoder() const { return std::span(layers).first(kEncoderLayers); }
    std::span<const DenseLayer> decoder() const { return std::span(layers).subspan(kEncoderLayers); }
};

/// Freshly initialized autoencoder.
AutoencoderModel make_autoencoder(std::uint64_t seed, double slope = 0.2);

/// Halves the learning rate once the monitored loss has gone
/// `patience` epochs without improving by more than `threshold`.
class PlateauScheduler {
public:
    PlateauScheduler(double initial_lr, double factor, int patience, double threshold, double min_lr);

    /// Feeds one epoch's loss; returns true if the rate was reduced.
    bool step(double loss);
    double learning_rate() const { return lr_; }
    int reductions() const { return reductions_; }

private:
    double lr_;
    double factor_;
    int patience_;
    double threshold_;
    double min_lr_;
    double best_;
    int bad_epochs_ = 0;
    int reductions_ = 0;
};

/// Signals a stop at epoch best_epoch + patience.
class EarlyStopping {
public:
    EarlyStopping(int patience, double threshold);

    /// Epochs count from 1. Returns true when training should stop after this epoch.
    bool step(int epoch, double loss);
    int best_epoch() const { return best_epoch_; }

private:
    int patience_;
    double threshold_;
    double best_;
    int best_epoch_ = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double learning_rate = 0.0;
    double wall_seconds = 0.0;
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_test_loss = 0.0;
    bool stopped_early = false;
};

struct TrainResult {
    AutoencoderModel model;  // weights from the lowest-test-loss epoch
    TrainingHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minimizes mean Huber reconstruction loss on preprocessed rows.
/// Throws DivergenceError if a loss becomes non-finite.
TrainResult train_autoencoder(const Matrix& train, const Matrix& test, const TrainConfig& config,
                              std::vector<std::string> feature_names = {}, std::uint64_t preprocessor_fingerprint = 0,
                              const EpochCallback& on_epoch = {});

/// Mean Huber loss of the model's reconstruction of `rows`.
double reconstruction_loss(const AutoencoderModel& model, const Matrix& rows, double delta);

/// N x 21 preprocessed rows to N x 16 latent rows.
Matrix encode(const AutoencoderModel& model, const Matrix& rows);
/// N x 16 latent rows to N x 21 preprocessed rows.
Matrix decode(const AutoencoderModel& model, const Matrix& latent);

std::string model_to_bytes(const AutoencoderModel& model);
AutoencoderModel model_from_bytes(std::string_view bytes);
void save_model(const AutoencoderModel& model, const std::filesystem::path& path);
AutoencoderModel load_model(const std::filesystem::path& path);

/// Message when `state` is not the preprocessor the model was trained with.
std::optional<std::string> fingerprint_warning(const AutoencoderModel& model, const PreprocessorState& state);

/// epoch,train_loss,test_loss,lr
std::string history_to_csv(const TrainingHistory& history);

}  // namespace flowae
