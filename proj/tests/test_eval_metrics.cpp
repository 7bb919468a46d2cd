#include "flowae/error.hpp"
#include "flowae/eval_metrics.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

using namespace flowae;

namespace {

// Independent histogram-formula oracle for KL(P||Q).
double kl_oracle(const std::vector<double>& p_vals, const std::vector<double>& q_vals, int bins) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto* v : {&p_vals, &q_vals}) {
        for (double x : *v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    auto hist = [&](const std::vector<double>& v) {
        std::vector<double> h(bins, 0.0);
        for (double x : v) {
            int b = static_cast<int>((x - lo) / ((hi - lo) / bins));
            h[std::min(b, bins - 1)] += 1.0;
        }
        double total = 0.0;
        for (double& c : h) total += (c = c / v.size() + 1e-10);
        for (double& c : h) c /= total;
        return h;
    };
    const auto p = hist(p_vals), q = hist(q_vals);
    double kl = 0.0;
    for (int b = 0; b < bins; ++b) kl += p[b] * std::log(p[b] / q[b]);
    return kl;
}

}  // namespace

TEST_CASE("global errors: spec examples") {
    const Matrix a = testing::random_matrix(4, 3, 1, 1.0, 2.0);
    const auto same = global_errors(a, a);
    CHECK(same.mse == 0.0);
    CHECK(same.rmse == 0.0);
    CHECK(same.mape_percent == 0.0);

    const auto one = global_errors(Matrix(1, 1, std::vector<double>{2.0}), Matrix(1, 1, std::vector<double>{1.0}));
    CHECK(one.mse == 1.0);
    CHECK(one.rmse == 1.0);
    CHECK(one.mape_percent == doctest::Approx(50.0));

    const auto zero = global_errors(Matrix(1, 2, {0.0, 4.0}), Matrix(1, 2, {1.0, 4.0}));
    CHECK(zero.mse == 0.5);
    CHECK(zero.mape_percent == 0.0);
    CHECK(zero.mape_excluded_zeros == 1);
    CHECK(zero.count == 2);

    CHECK_THROWS_AS(global_errors(Matrix(2, 2), Matrix(2, 3)), DataError);
}

TEST_CASE("rmse is sqrt(mse)") {
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto e = global_errors(testing::random_matrix(30, 21, s), testing::random_matrix(30, 21, s + 1000));
        CHECK(std::abs(e.rmse * e.rmse - e.mse) <= 1e-9 * e.mse);
    }
}

TEST_CASE("median percent error") {
    std::vector<double> y{1, 2, 3, 4, 5}, yhat;
    for (double v : y) yhat.push_back(1.01 * v);
    CHECK(median_percent_error(y, yhat).value.value() == doctest::Approx(1.0));

    const std::vector<double> half_y{10, 10, 10, 10}, half_hat{10, 10, 10.2, 10.2};
    CHECK(median_percent_error(half_y, half_hat).value.value() == doctest::Approx(1.0));
    CHECK(median_percent_error(y, y).value.value() == 0.0);

    const std::vector<double> zeros{0, 0, 0}, some{1, 2, 3};
    const auto undefined = median_percent_error(zeros, some);
    CHECK_FALSE(undefined.value.has_value());
    CHECK(undefined.excluded_zeros == 3);

    const std::vector<double> mixed{0, 4}, mixed_hat{5, 5};
    const auto m = median_percent_error(mixed, mixed_hat);
    CHECK(m.value.value() == doctest::Approx(25.0));
    CHECK(m.excluded_zeros == 1);
    CHECK_THROWS_AS(median_percent_error(mixed, some), DataError);
}

TEST_CASE("kl divergence") {
    Rng rng(5);
    std::vector<double> p(1000), q(1000);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = rng.normal();
        q[i] = p[i] + 5.0;
    }
    const double shifted = kl_divergence(p, q, 50);
    CHECK(shifted > 1.0);
    CHECK(shifted == doctest::Approx(kl_oracle(p, q, 50)).epsilon(1e-9));
    CHECK(kl_divergence(p, p) == 0.0);

    const std::vector<double> flat{3, 3, 3};
    CHECK(kl_divergence(flat, flat) == 0.0);

    for (int t = 0; t < 200; ++t) {
        std::vector<double> a(20), b(30);
        for (double& v : a) v = rng.uniform(-1, 1);
        for (double& v : b) v = rng.normal() * 2;
        const double kl = kl_divergence(a, b, 1 + rng.below(60));
        CHECK(kl >= 0.0);
        CHECK(std::isfinite(kl));
    }
    const std::vector<double> single{1.0};
    CHECK_THROWS_AS(kl_divergence(single, p), DataError);
    CHECK_THROWS_AS(kl_divergence(p, q, 0), UsageError);
}

TEST_CASE("correlation difference") {
    const Matrix x = testing::random_matrix(40, 5, 7);
    Matrix affine = x;
    for (std::size_t r = 0; r < 40; ++r) {
        for (std::size_t c = 0; c < 5; ++c) affine(r, c) = (c % 2 ? -3.0 : 2.0) * x(r, c) + 7.0;
    }
    const Matrix d = correlation_difference(x, x);
    const Matrix da = correlation_difference(x, affine);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(d(i, i) == 0.0);
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(d(i, j) == 0.0);
            // Sign flips in two columns flip signs of cross correlations; use positive scales only below.
        }
    }
    Matrix positive = x;
    for (double& v : positive.data()) v = 2.0 * v + 7.0;
    const Matrix dp = correlation_difference(x, positive);
    for (double v : dp.data()) CHECK(std::abs(v) < 1e-12);
    for (std::size_t i = 0; i < 5; ++i) CHECK(da(i, i) == 0.0);

    const Matrix other = testing::random_matrix(40, 5, 8);
    const Matrix dd = correlation_difference(x, other);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(dd(i, j) - dd(j, i)) < 1e-12);
    }

    Matrix constant = x;
    for (std::size_t r = 0; r < 40; ++r) constant(r, 2) = 1.5;
    const Matrix dc = correlation_difference(constant, constant);
    CHECK(std::isnan(dc(2, 0)));
    CHECK(std::isnan(dc(2, 2)));
    CHECK(dc(0, 1) == 0.0);
}

TEST_CASE("compression ratio") {
    CHECK(compression_ratio(21, 16, 8, 4) == 2.625);
    CHECK(compression_ratio(21, 16, 8, 8) == 1.3125);
    CHECK(compression_ratio(21, 16, 4, 4) == 1.3125);
    for (std::size_t ow : {1, 2, 4, 8}) {
        for (std::size_t lw : {1, 2, 4, 8}) CHECK(std::abs(compression_ratio(21, 16, ow, lw) - 3.28) > 0.01);
    }
    CHECK_THROWS_AS(compression_ratio(0, 16, 8, 4), UsageError);
}

TEST_CASE("reconstruction report and artifacts") {
    const Matrix x = testing::random_matrix(50, 21, 9, 1.0, 10.0);
    Matrix y = x;
    for (double& v : y.data()) v *= 1.02;
    std::vector<std::string> names;
    for (int i = 0; i < 21; ++i) names.push_back("f" + std::to_string(i));
    const auto rep = build_reconstruction_report(x, y, names);
    CHECK(rep.rows == 50);
    CHECK(rep.compression_ratio == 2.625);
    CHECK(rep.bytes_original == 50 * 21 * 8);
    CHECK(rep.bytes_compressed == 50 * 16 * 4);
    REQUIRE(rep.features.size() == 21);
    for (const auto& f : rep.features) {
        CHECK(f.median_error.value.value() == doctest::Approx(2.0));
        CHECK(f.kl_divergence >= 0.0);
    }
    const auto j = nlohmann::json::parse(report_to_json(rep));
    CHECK(j["compression_ratio"] == 2.625);
    CHECK(j["features"].size() == 21);
    CHECK(feature_table_csv(rep).rfind("feature,median_percent_error,excluded_zeros,kl_divergence\n", 0) == 0);
    CHECK(correlation_difference_csv(rep).find("f20") != std::string::npos);
    const auto rows_csv = row_relative_errors_csv(x, y, names);
    CHECK(std::count(rows_csv.begin(), rows_csv.end(), '\n') == 51);
    CHECK(report_to_json(rep) == report_to_json(build_reconstruction_report(x, y, names)));
}
