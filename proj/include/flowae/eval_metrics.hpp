#pragma once

#include "flowae/matrix.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flowae {

struct GlobalErrors {
    double mse = 0.0;
    double rmse = 0.0;
    /// Mean absolute percentage error over entries with a non-zero original value.
    double mape_percent = 0.0;
    std::size_t mape_excluded_zeros = 0;
    std::size_t count = 0;
};

/// Pooled over every entry of the two (same-shape) matrices.
GlobalErrors global_errors(const Matrix& original, const Matrix& reconstructed);

struct PercentError {
    /// Empty when every original value is zero.
    std::optional<double> value;
    std::size_t excluded_zeros = 0;
};

/// Median over rows with y != 0 of 100 * |y - yhat| / |y|.
PercentError median_percent_error(std::span<const double> original, std::span<const double> reconstructed);

inline constexpr std::size_t kDefaultKlBins = 50;
inline constexpr double kKlSmoothing = 1e-10;

/// KL(P || Q) between histograms of the two columns over shared equal-width
/// bins spanning the union range. Bins are smoothed by +epsilon and
/// renormalized. Natural log. Returns 0 when the union range is degenerate.
double kl_divergence(std::span<const double> original, std::span<const double> reconstructed,
                     std::size_t bins = kDefaultKlBins);

/// Pearson correlation matrix. Rows/columns of zero-variance features are NaN.
Matrix correlation_matrix(const Matrix& m);

/// corr(original) - corr(reconstructed). Undefined entries are NaN; the diagonal
/// of every defined feature is exactly 0.
Matrix correlation_difference(const Matrix& original, const Matrix& reconstructed);

/// (n_features * original_width_bytes) / (latent_dim * latent_width_bytes).
double compression_ratio(std::size_t n_features, std::size_t latent_dim, std::size_t original_width_bytes,
                         std::size_t latent_width_bytes);

struct MetricsConfig {
    std::size_t kl_bins = kDefaultKlBins;
    std::size_t original_width_bytes = 8;
    std::size_t latent_width_bytes = 4;
    std::size_t latent_dim = 16;
};

struct FeatureReconstruction {
    std::string name;
    PercentError median_error;
    double kl_divergence = 0.0;
};

struct ReconstructionReport {
    GlobalErrors errors;
    std::vector<FeatureReconstruction> features;
    Matrix correlation_difference;
    double compression_ratio = 0.0;
    std::size_t bytes_original = 0;
    std::size_t bytes_compressed = 0;
    std::size_t rows = 0;
    std::vector<std::string> warnings;
};

/// Both matrices in original units.
ReconstructionReport build_reconstruction_report(const Matrix& original, const Matrix& reconstructed,
                                                 const std::vector<std::string>& feature_names,
                                                 const MetricsConfig& config = {});

std::string report_to_json(const ReconstructionReport& report);
/// feature,median_percent_error,excluded_zeros,kl_divergence, sorted by median error.
std::string feature_table_csv(const ReconstructionReport& report);
/// Square matrix with a header row and a leading name column.
std::string correlation_difference_csv(const ReconstructionReport& report);
/// One row per record: 100 * |y - yhat| / |y| per feature (empty cell for y = 0).
std::string row_relative_errors_csv(const Matrix& original, const Matrix& reconstructed,
                                    const std::vector<std::string>& feature_names);

}  // namespace flowae
