#pragma once

#include "flowae/matrix.hpp"
#include "flowae/rng.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace flowae::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

/// Rows x_j = offset + sum_k A_jk f_k with 16 standard-normal factors per row:
/// rank <= 16 after centering, positive and away from zero for % errors.
inline Matrix low_rank_matrix(std::size_t rows, std::uint64_t seed, double offset = 10.0, std::size_t factors = 16) {
    Rng rng(seed);
    Matrix mixing(21, factors);
    for (double& v : mixing.data()) v = rng.normal() / 4.0;
    Matrix m(rows, 21);
    std::vector<double> f(factors);
    for (std::size_t r = 0; r < rows; ++r) {
        for (double& v : f) v = rng.normal();
        for (std::size_t j = 0; j < 21; ++j) {
            double x = offset;
            for (std::size_t k = 0; k < factors; ++k) x += mixing(j, k) * f[k];
            m(r, j) = x;
        }
    }
    return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("flowae_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace flowae::testing
