#include "flowae/preprocess.hpp"

#include "flowae/error.hpp"
#include "flowae/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace flowae {
namespace {

constexpr int kFormatVersion = 1;

void require_fitted(const PreprocessorState& state, const Matrix& matrix) {
    if (!state.fitted()) throw UsageError("preprocessor state is not fitted");
    if (matrix.cols() != kNumFeatures) {
        throw DataError("expected " + std::to_string(kNumFeatures) + " feature columns, got " + std::to_string(matrix.cols()));
    }
}

}  // namespace

std::uint64_t PreprocessorState::fingerprint() const {
    std::uint64_t h = io::fnv1a("flowae-preprocessor");
    for (const auto* arr : {&clip_threshold, &median, &iqr}) {
        h = io::fnv1a(std::string_view(reinterpret_cast<const char*>(arr->data()), arr->size() * sizeof(double)), h);
    }
    return h;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DataError("quantile of an empty column");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

PreprocessorState fit_preprocessor(const Matrix& matrix, std::vector<std::string> feature_names) {
    if (matrix.cols() != kNumFeatures) {
        throw DataError("expected " + std::to_string(kNumFeatures) + " feature columns, got " + std::to_string(matrix.cols()));
    }
    if (matrix.rows() < 4) throw DataError("preprocessor fit needs at least 4 rows");
    PreprocessorState state;
    state.feature_names = feature_names.empty() ? default_schema().compressible_columns : std::move(feature_names);
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        auto col = matrix.column(i);
        for (double v : col) {
            if (!std::isfinite(v)) throw DataError("non-finite value in feature " + std::to_string(i));
        }
        std::sort(col.begin(), col.end());
        const double clip = quantile_sorted(col, kClipQuantile);
        // Sorted order survives clipping, so the clipped column is still sorted.
        for (double& v : col) v = std::min(v, clip);
        const double q1 = quantile_sorted(col, 0.25);
        const double q3 = quantile_sorted(col, 0.75);
        state.clip_threshold[i] = clip;
        state.median[i] = quantile_sorted(col, 0.5);
        state.iqr[i] = (q3 - q1) > 0.0 ? (q3 - q1) : 1.0;
    }
    state.fitted_on = matrix.rows();
    return state;
}

Matrix transform(const Matrix& matrix, const PreprocessorState& state) {
    require_fitted(state, matrix);
    Matrix out(matrix.rows(), kNumFeatures);
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            out(r, i) = (std::min(matrix(r, i), state.clip_threshold[i]) - state.median[i]) / state.iqr[i];
        }
    }
    return out;
}

Matrix inverse_transform(const Matrix& matrix, const PreprocessorState& state) {
    require_fitted(state, matrix);
    Matrix out(matrix.rows(), kNumFeatures);
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t i = 0; i < kNumFeatures; ++i) out(r, i) = matrix(r, i) * state.iqr[i] + state.median[i];
    }
    return out;
}

std::string preprocessor_to_json(const PreprocessorState& state) {
    nlohmann::json j;
    j["version"] = kFormatVersion;
    j["feature_names"] = state.feature_names;
    j["p99_9"] = state.clip_threshold;
    j["median"] = state.median;
    j["iqr"] = state.iqr;
    j["fitted_on"] = state.fitted_on;
    return j.dump(2) + "\n";
}

PreprocessorState preprocessor_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("version").get<int>() != kFormatVersion) {
            throw FormatError("unsupported preprocessor version " + j.at("version").dump());
        }
        PreprocessorState s;
        s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        const auto clip = j.at("p99_9").get<std::vector<double>>();
        const auto med = j.at("median").get<std::vector<double>>();
        const auto iqr = j.at("iqr").get<std::vector<double>>();
        if (clip.size() != kNumFeatures || med.size() != kNumFeatures || iqr.size() != kNumFeatures ||
            s.feature_names.size() != kNumFeatures) {
            throw FormatError("preprocessor arrays must have 21 entries");
        }
        std::copy(clip.begin(), clip.end(), s.clip_threshold.begin());
        std::copy(med.begin(), med.end(), s.median.begin());
        std::copy(iqr.begin(), iqr.end(), s.iqr.begin());
        for (double v : s.iqr) {
            if (!(v > 0.0)) throw FormatError("preprocessor iqr entries must be > 0");
        }
        s.fitted_on = j.value("fitted_on", std::size_t{1});
        if (s.fitted_on == 0) throw FormatError("preprocessor is not fitted");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid preprocessor file: ") + e.what());
    }
}

void save_preprocessor(const PreprocessorState& state, const std::filesystem::path& path) {
    io::write_file_atomic(path, preprocessor_to_json(state));
}

PreprocessorState load_preprocessor(const std::filesystem::path& path) {
    return preprocessor_from_json(io::read_file(path));
}

}  // namespace flowae
