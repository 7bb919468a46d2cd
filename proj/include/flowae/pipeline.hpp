#pragma once

#include "flowae/autoencoder.hpp"
#include "flowae/classify_eval.hpp"
#include "flowae/eval_metrics.hpp"
#include "flowae/flow_data.hpp"
#include "flowae/neural_core.hpp"
#include "flowae/preprocess.hpp"
#include "flowae/random_forest.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace flowae::pipeline {

enum class FitOn { Train, All };
enum class FeatureSource { Original, Compressed };

struct SynthConfig {
    std::size_t n_per_class = 2000;
    std::size_t n_classes = 5;
    /// Per-class log-normal parameters; the built-in spec when empty.
    std::optional<std::filesystem::path> spec;
    std::string output_name = "synthetic.csv";
};

struct PipelineConfig {
    std::optional<std::filesystem::path> schema;
    std::vector<std::filesystem::path> inputs;
    std::uint64_t seed = 42;
    double test_fraction = 0.2;
    FitOn fit_preprocessor_on = FitOn::Train;
    TrainConfig train;
    ForestParams forest;
    MetricsConfig metrics;
    SynthConfig synth;
    std::filesystem::path output_dir = "flowae_out";
    bool force = false;

    void validate() const;
    FeatureSchema resolved_schema() const;
    /// Training seed follows the pipeline seed.
    TrainConfig train_config() const;
    std::filesystem::path out(const std::string& name) const { return output_dir / name; }
};

/// JSON config; unspecified keys keep their defaults.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const std::string& text);

/// Fixed artifact names inside the output directory.
namespace artifact {
inline constexpr const char* kModel = "model.bin";
inline constexpr const char* kPreprocessor = "preprocessor.json";
inline constexpr const char* kHistory = "history.csv";
inline constexpr const char* kLatent = "latent.bin";
inline constexpr const char* kReconstructed = "reconstructed.csv";
inline constexpr const char* kReconstructionReport = "reconstruction_report.json";
inline constexpr const char* kFeatureTable = "feature_reconstruction.csv";
inline constexpr const char* kCorrelationDifference = "correlation_difference.csv";
inline constexpr const char* kRowErrors = "row_relative_errors.csv";
inline constexpr const char* kComparison = "comparison.json";
inline constexpr const char* kComparisonText = "comparison.txt";
}  // namespace artifact

/// Latent container: identity strings, latent values at a fixed byte width, labels.
struct LatentFile {
    std::uint32_t latent_dim = kLatentDim;
    std::uint32_t width_bytes = 4;
    std::uint64_t preprocessor_fingerprint = 0;
    std::vector<std::string> identity_columns;
    std::optional<std::string> label_column;
    std::vector<std::vector<std::string>> identity;  // [row][column]
    Matrix latent;
    std::vector<std::string> labels;
};

std::string latent_to_bytes(const LatentFile& file);
LatentFile latent_from_bytes(std::string_view bytes);
void save_latent(const LatentFile& file, const std::filesystem::path& path);
LatentFile load_latent(const std::filesystem::path& path);

/// Rounds every value to what a `width_bytes` float stores (4 or 8).
void quantize(Matrix& m, std::size_t width_bytes);

/// Preprocess, encode, quantize to the latent width.
Matrix compress_features(const AutoencoderModel& model, const PreprocessorState& state, const Matrix& features,
                         std::size_t width_bytes);
/// Decode, invert scaling, clamp count and packet-size features at 0.
Matrix decompress_features(const AutoencoderModel& model, const PreprocessorState& state, const Matrix& latent);

/// Concatenation of every configured input CSV.
Dataset load_inputs(const PipelineConfig& config);

std::filesystem::path cmd_synth(const PipelineConfig& config);

struct TrainOutcome {
    TrainingHistory history;
    std::filesystem::path model, preprocessor, history_csv;
};
TrainOutcome cmd_train(const PipelineConfig& config, const EpochCallback& on_epoch = {});

struct LoadedModel {
    AutoencoderModel model;
    PreprocessorState state;
    std::vector<std::string> warnings;
};
/// Loads both artifacts; a fingerprint mismatch throws UsageError unless `force`.
LoadedModel load_model_pair(const std::filesystem::path& model_path, const std::filesystem::path& preprocessor_path,
                            bool force);

std::filesystem::path cmd_compress(const PipelineConfig& config, const std::filesystem::path& input,
                                   const std::filesystem::path& model_path,
                                   const std::filesystem::path& preprocessor_path,
                                   const std::filesystem::path& output);
std::filesystem::path cmd_decompress(const PipelineConfig& config, const std::filesystem::path& latent_path,
                                     const std::filesystem::path& model_path,
                                     const std::filesystem::path& preprocessor_path,
                                     const std::filesystem::path& output);

/// Compares `original` against `reconstructed`, or against the model's
/// in-memory reconstruction when no reconstructed CSV is given.
ReconstructionReport cmd_evaluate(const PipelineConfig& config, const std::filesystem::path& original,
                                  const std::optional<std::filesystem::path>& reconstructed,
                                  const std::filesystem::path& model_path,
                                  const std::filesystem::path& preprocessor_path);

ClassificationReport cmd_classify(const PipelineConfig& config, FeatureSource source);
ComparisonReport cmd_compare(const PipelineConfig& config);

/// CLI exit codes.
inline constexpr int kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitDivergence = 3;

}  // namespace flowae::pipeline
