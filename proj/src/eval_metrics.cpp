#include "flowae/eval_metrics.hpp"

#include "flowae/error.hpp"
#include "flowae/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace flowae {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same_shape(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DataError("shape mismatch: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

nlohmann::json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace

GlobalErrors global_errors(const Matrix& original, const Matrix& reconstructed) {
    require_same_shape(original, reconstructed);
    GlobalErrors out;
    out.count = original.size();
    double sq = 0.0;
    double pct = 0.0;
    std::size_t pct_n = 0;
    for (std::size_t i = 0; i < original.size(); ++i) {
        const double y = original.data()[i];
        const double d = y - reconstructed.data()[i];
        sq += d * d;
        if (y == 0.0) {
            ++out.mape_excluded_zeros;
        } else {
            pct += std::abs(d / y);
            ++pct_n;
        }
    }
    out.mse = out.count ? sq / static_cast<double>(out.count) : 0.0;
    out.rmse = std::sqrt(out.mse);
    out.mape_percent = pct_n ? 100.0 * pct / static_cast<double>(pct_n) : 0.0;
    return out;
}

PercentError median_percent_error(std::span<const double> original, std::span<const double> reconstructed) {
    if (original.size() != reconstructed.size()) throw DataError("median_percent_error: length mismatch");
    PercentError out;
    std::vector<double> errs;
    errs.reserve(original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        if (original[i] == 0.0) {
            ++out.excluded_zeros;
            continue;
        }
        errs.push_back(100.0 * std::abs(original[i] - reconstructed[i]) / std::abs(original[i]));
    }
    if (errs.empty()) return out;
    std::sort(errs.begin(), errs.end());
    const std::size_t n = errs.size();
    out.value = n % 2 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
    return out;
}

double kl_divergence(std::span<const double> original, std::span<const double> reconstructed, std::size_t bins) {
    if (original.size() < 2 || reconstructed.size() < 2) throw DataError("kl_divergence needs at least 2 values per side");
    if (bins < 1) throw UsageError("kl_divergence needs at least one bin");
    const auto [pmin, pmax] = std::minmax_element(original.begin(), original.end());
    const auto [qmin, qmax] = std::minmax_element(reconstructed.begin(), reconstructed.end());
    const double lo = std::min(*pmin, *qmin);
    const double hi = std::max(*pmax, *qmax);
    if (!(hi > lo)) return 0.0;
    const double width = (hi - lo) / static_cast<double>(bins);

    auto histogram = [&](std::span<const double> values) {
        std::vector<double> h(bins, 0.0);
        for (double v : values) {
            auto b = static_cast<std::size_t>((v - lo) / width);
            h[std::min(b, bins - 1)] += 1.0;
        }
        double total = 0.0;
        for (double& x : h) {
            x = x / static_cast<double>(values.size()) + kKlSmoothing;
            total += x;
        }
        for (double& x : h) x /= total;
        return h;
    };
    const auto p = histogram(original);
    const auto q = histogram(reconstructed);
    double kl = 0.0;
    for (std::size_t b = 0; b < bins; ++b) kl += p[b] * std::log(p[b] / q[b]);
    return std::max(kl, 0.0);
}

Matrix correlation_matrix(const Matrix& m) {
    const std::size_t n = m.rows();
    const std::size_t d = m.cols();
    if (n < 3) throw DataError("correlation needs at least 3 rows");
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) mean[c] += m(r, c);
    }
    for (double& v : mean) v /= static_cast<double>(n);
    Matrix centered(n, d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) centered(r, c) = m(r, c) - mean[c];
    }
    Matrix cov(d, d);
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += centered(r, a) * centered(r, b);
            cov(a, b) = s;
        }
    }
    Matrix corr(d, d, kNaN);
    for (std::size_t a = 0; a < d; ++a) {
        if (!(cov(a, a) > 0.0)) continue;
        corr(a, a) = 1.0;
        for (std::size_t b = a + 1; b < d; ++b) {
            if (!(cov(b, b) > 0.0)) continue;
            const double v = std::clamp(cov(a, b) / std::sqrt(cov(a, a) * cov(b, b)), -1.0, 1.0);
            corr(a, b) = v;
            corr(b, a) = v;
        }
    }
    return corr;
}

Matrix correlation_difference(const Matrix& original, const Matrix& reconstructed) {
    require_same_shape(original, reconstructed);
    const Matrix a = correlation_matrix(original);
    const Matrix b = correlation_matrix(reconstructed);
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    return out;
}

double compression_ratio(std::size_t n_features, std::size_t latent_dim, std::size_t original_width_bytes,
                         std::size_t latent_width_bytes) {
    if (!n_features || !latent_dim || !original_width_bytes || !latent_width_bytes) {
        throw UsageError("compression ratio inputs must be positive");
    }
    return static_cast<double>(n_features * original_width_bytes) / static_cast<double>(latent_dim * latent_width_bytes);
}

ReconstructionReport build_reconstruction_report(const Matrix& original, const Matrix& reconstructed,
                                                 const std::vector<std::string>& feature_names,
                                                 const MetricsConfig& config) {
    require_same_shape(original, reconstructed);
    if (feature_names.size() != original.cols()) throw DataError("feature name count does not match matrix width");
    ReconstructionReport report;
    report.rows = original.rows();
    report.errors = global_errors(original, reconstructed);
    report.features.resize(original.cols());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(original.cols()); ++ci) {
        const auto c = static_cast<std::size_t>(ci);
        const auto y = original.column(c);
        const auto yhat = reconstructed.column(c);
        auto& f = report.features[c];
        f.name = feature_names[c];
        f.median_error = median_percent_error(y, yhat);
        f.kl_divergence = kl_divergence(y, yhat, config.kl_bins);
    }
    for (const auto& f : report.features) {
        if (!f.median_error.value) report.warnings.push_back("median % error undefined for all-zero feature " + f.name);
    }
    report.correlation_difference = correlation_difference(original, reconstructed);
    report.compression_ratio = compression_ratio(original.cols(), config.latent_dim, config.original_width_bytes,
                                                 config.latent_width_bytes);
    report.bytes_original = original.rows() * original.cols() * config.original_width_bytes;
    report.bytes_compressed = original.rows() * config.latent_dim * config.latent_width_bytes;
    return report;
}

std::string report_to_json(const ReconstructionReport& report) {
    nlohmann::json j;
    j["rows"] = report.rows;
    j["mse"] = report.errors.mse;
    j["rmse"] = report.errors.rmse;
    j["mape_percent"] = report.errors.mape_percent;
    j["mape_excluded_zeros"] = report.errors.mape_excluded_zeros;
    j["compression_ratio"] = report.compression_ratio;
    j["bytes_original"] = report.bytes_original;
    j["bytes_compressed"] = report.bytes_compressed;
    auto features = nlohmann::json::array();
    for (const auto& f : report.features) {
        features.push_back({{"feature", f.name},
                            {"median_percent_error", f.median_error.value ? nlohmann::json(*f.median_error.value) : nlohmann::json()},
                            {"excluded_zeros", f.median_error.excluded_zeros},
                            {"kl_divergence", f.kl_divergence}});
    }
    j["features"] = features;
    auto corr = nlohmann::json::array();
    for (std::size_t r = 0; r < report.correlation_difference.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (double v : report.correlation_difference.row(r)) row.push_back(number_or_null(v));
        corr.push_back(row);
    }
    j["correlation_difference"] = corr;
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

std::string feature_table_csv(const ReconstructionReport& report) {
    std::vector<std::size_t> order(report.features.size());
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t i) {
        return report.features[i].median_error.value.value_or(std::numeric_limits<double>::infinity());
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    std::string out = "feature,median_percent_error,excluded_zeros,kl_divergence\n";
    for (auto i : order) {
        const auto& f = report.features[i];
        out += io::csv_escape(f.name) + "," + (f.median_error.value ? io::format_double(*f.median_error.value) : "") +
               "," + std::to_string(f.median_error.excluded_zeros) + "," + io::format_double(f.kl_divergence) + "\n";
    }
    return out;
}

std::string correlation_difference_csv(const ReconstructionReport& report) {
    std::string out = "feature";
    for (const auto& f : report.features) out += "," + io::csv_escape(f.name);
    out += "\n";
    for (std::size_t r = 0; r < report.correlation_difference.rows(); ++r) {
        out += io::csv_escape(report.features[r].name);
        for (double v : report.correlation_difference.row(r)) out += "," + (std::isfinite(v) ? io::format_double(v) : "");
        out += "\n";
    }
    return out;
}

std::string row_relative_errors_csv(const Matrix& original, const Matrix& reconstructed,
                                    const std::vector<std::string>& feature_names) {
    require_same_shape(original, reconstructed);
    std::string out = "row";
    for (const auto& n : feature_names) out += "," + io::csv_escape(n);
    out += "\n";
    for (std::size_t r = 0; r < original.rows(); ++r) {
        out += std::to_string(r);
        for (std::size_t c = 0; c < original.cols(); ++c) {
            const double y = original(r, c);
            out += ",";
            if (y != 0.0) out += io::format_double(100.0 * std::abs(y - reconstructed(r, c)) / std::abs(y));
        }
        out += "\n";
    }
    return out;
}

}  // namespace flowae
