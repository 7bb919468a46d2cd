#include "flowae/error.hpp"
#include "flowae/preprocess.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace flowae;

namespace {

// Independent linear-interpolation quantile: h = (N-1) q, x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
double oracle_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const double fl = std::floor(h);
    const auto i = static_cast<std::size_t>(fl);
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (h - fl) * (v[i + 1] - v[i]);
}

Matrix broadcast_column(const std::vector<double>& col) {
    Matrix m(col.size(), kNumFeatures);
    for (std::size_t r = 0; r < col.size(); ++r) {
        for (std::size_t c = 0; c < kNumFeatures; ++c) m(r, c) = col[r];
    }
    return m;
}

Matrix heavy_tailed(std::size_t rows, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, kNumFeatures);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < kNumFeatures; ++c) m(r, c) = std::exp(2.0 + 1.5 * rng.normal()) + static_cast<double>(c);
    }
    return m;
}

}  // namespace

TEST_CASE("fit on 1..1000") {
    std::vector<double> col(1000);
    for (int i = 0; i < 1000; ++i) col[static_cast<std::size_t>(i)] = i + 1;
    const auto s = fit_preprocessor(broadcast_column(col));
    const double p999 = oracle_quantile(col, 0.999);
    CHECK(p999 == doctest::Approx(999.001).epsilon(1e-12));
    CHECK(s.clip_threshold[0] == doctest::Approx(p999).epsilon(1e-15));
    CHECK(s.median[0] == doctest::Approx(500.5).epsilon(1e-15));
    CHECK(s.iqr[0] == doctest::Approx(499.5).epsilon(1e-15));
    CHECK(s.fitted_on == 1000);
}

TEST_CASE("constant column falls back to unit IQR") {
    const auto s = fit_preprocessor(broadcast_column({5, 5, 5, 5}));
    CHECK(s.median[3] == 5.0);
    CHECK(s.iqr[3] == 1.0);
}

TEST_CASE("outlier is clipped before median and IQR") {
    const std::vector<double> col{0, 0, 0, 1000000};
    const auto s = fit_preprocessor(broadcast_column(col));
    const double clip = oracle_quantile(col, 0.999);
    CHECK(clip < 1000000.0);
    CHECK(s.clip_threshold[0] == doctest::Approx(clip));
    std::vector<double> clipped = col;
    for (double& v : clipped) v = std::min(v, clip);
    const double iqr_clipped = oracle_quantile(clipped, 0.75) - oracle_quantile(clipped, 0.25);
    const double iqr_raw = oracle_quantile(col, 0.75) - oracle_quantile(col, 0.25);
    CHECK(iqr_clipped != iqr_raw);
    CHECK(s.iqr[0] == doctest::Approx(iqr_clipped));
}

TEST_CASE("fit errors") {
    CHECK_THROWS_AS(fit_preprocessor(Matrix(3, kNumFeatures)), DataError);
    Matrix bad(5, kNumFeatures);
    bad(2, 7) = std::nan("");
    try {
        fit_preprocessor(bad);
        FAIL("expected error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("feature 7") != std::string::npos);
    }
    CHECK_THROWS_AS(transform(Matrix(1, kNumFeatures), PreprocessorState{}), UsageError);
    CHECK_THROWS_AS(inverse_transform(Matrix(1, kNumFeatures), PreprocessorState{}), UsageError);
}

TEST_CASE("transform centering, scaling and clipping") {
    const auto s = fit_preprocessor(heavy_tailed(500, 1));
    Matrix x(3, kNumFeatures);
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        x(0, i) = s.median[i];
        x(1, i) = s.median[i] + s.iqr[i];
        x(2, i) = 10.0 * s.clip_threshold[i];
    }
    const auto t = transform(x, s);
    Matrix at_clip(1, kNumFeatures);
    for (std::size_t i = 0; i < kNumFeatures; ++i) at_clip(0, i) = s.clip_threshold[i];
    const auto tc = transform(at_clip, s);
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        CHECK(t(0, i) == 0.0);
        CHECK(t(1, i) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(t(2, i) == tc(0, i));
    }
    const auto back = inverse_transform(t, s);
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        CHECK(inverse_transform(Matrix(1, kNumFeatures), s)(0, i) == s.median[i]);
        CHECK(back(2, i) == doctest::Approx(s.clip_threshold[i]).epsilon(1e-14));
    }
}

TEST_CASE("inverse undoes transform on in-range values") {
    const auto train = heavy_tailed(2000, 2);
    const auto s = fit_preprocessor(train);
    Rng rng(3);
    Matrix x(1000, kNumFeatures);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t i = 0; i < kNumFeatures; ++i) x(r, i) = rng.uniform(0.0, s.clip_threshold[i]);
    }
    const auto back = inverse_transform(transform(x, s), s);
    double worst = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double y = x.data()[k];
        worst = std::max(worst, std::abs(back.data()[k] - y) / std::max(std::abs(y), 1e-300));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("transformed training data has median 0 and IQR 1") {
    const auto train = heavy_tailed(3001, 4);
    const auto s = fit_preprocessor(train);
    const auto t = transform(train, s);
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const auto col = t.column(i);
        CHECK(std::abs(oracle_quantile(col, 0.5)) < 1e-9);
        CHECK(std::abs(oracle_quantile(col, 0.75) - oracle_quantile(col, 0.25) - 1.0) < 1e-9);
    }
}

TEST_CASE("transform is monotone and clip-then-scale is observable") {
    const auto train = heavy_tailed(1000, 5);
    const auto s = fit_preprocessor(train);
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        Matrix pair(2, kNumFeatures);
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            const double a = rng.uniform(0.0, 2.0 * s.clip_threshold[i]);
            const double b = rng.uniform(0.0, 2.0 * s.clip_threshold[i]);
            pair(0, i) = std::min(a, b);
            pair(1, i) = std::max(a, b);
        }
        const auto t = transform(pair, s);
        for (std::size_t i = 0; i < kNumFeatures; ++i) CHECK(t(0, i) <= t(1, i));
    }

    // Raising values already above the clip threshold leaves the fit unchanged.
    Matrix raised = train;
    for (std::size_t r = 0; r < raised.rows(); ++r) {
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            if (raised(r, i) > s.clip_threshold[i]) raised(r, i) *= 1000.0;
        }
    }
    const auto s2 = fit_preprocessor(raised);
    CHECK(s2.median == s.median);
    CHECK(s2.iqr == s.iqr);
}

TEST_CASE("preprocessor JSON round trip is exact") {
    const auto s = fit_preprocessor(heavy_tailed(100, 7));
    const auto back = preprocessor_from_json(preprocessor_to_json(s));
    CHECK(back.clip_threshold == s.clip_threshold);
    CHECK(back.median == s.median);
    CHECK(back.iqr == s.iqr);
    CHECK(back.feature_names == s.feature_names);
    CHECK(back.fingerprint() == s.fingerprint());
    CHECK_THROWS_AS(preprocessor_from_json(R"({"version": 99})"), FormatError);
    CHECK_THROWS_AS(preprocessor_from_json("{"), FormatError);
}
