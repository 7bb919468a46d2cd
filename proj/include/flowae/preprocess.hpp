#pragma once

#include "flowae/flow_data.hpp"
#include "flowae/matrix.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace flowae {

/// Fitted per-feature clip threshold (99.9th percentile), median and IQR.
///
/// Median and IQR are taken over the clipped column. A zero IQR is stored
/// as 1 so that constant features reduce to median centering.
struct PreprocessorState {
    std::vector<std::string> feature_names;
    std::array<double, kNumFeatures> clip_threshold{};
    std::array<double, kNumFeatures> median{};
    std::array<double, kNumFeatures> iqr{};
    std::size_t fitted_on = 0;

    bool fitted() const { return fitted_on > 0; }
    /// Hash of the fitted values; stamped into models trained on this state.
    std::uint64_t fingerprint() const;
};

inline constexpr double kClipQuantile = 0.999;

/// Linear interpolation between order statistics at rank q * (N - 1).
double quantile_sorted(std::span<const double> sorted, double q);

PreprocessorState fit_preprocessor(const Matrix& matrix, std::vector<std::string> feature_names = {});

/// (min(x, clip) - median) / iqr, per feature.
Matrix transform(const Matrix& matrix, const PreprocessorState& state);

/// x * iqr + median. Clipping is lossy and is not undone.
Matrix inverse_transform(const Matrix& matrix, const PreprocessorState& state);

std::string preprocessor_to_json(const PreprocessorState& state);
PreprocessorState preprocessor_from_json(const std::string& text);
void save_preprocessor(const PreprocessorState& state, const std::filesystem::path& path);
PreprocessorState load_preprocessor(const std::filesystem::path& path);

}  // namespace flowae
