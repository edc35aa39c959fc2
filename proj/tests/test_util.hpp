#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "dkmo/linalg.hpp"
#include "dkmo/random.hpp"

namespace testutil {

using dkmo::linalg::Matrix;

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, dkmo::Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

inline Matrix random_symmetric(Eigen::Index n, dkmo::Rng& rng) {
    Matrix a = gaussian(n, n, rng);
    return (a + a.transpose()) / 2.0;
}

// A A^T + shift I: strictly positive definite for shift > 0.
inline Matrix random_pd(Eigen::Index n, dkmo::Rng& rng, double shift = 1.0) {
    Matrix a = gaussian(n, n, rng);
    return a * a.transpose() + shift * Matrix::Identity(n, n);
}

// PSD of the given rank.
inline Matrix random_psd_rank(Eigen::Index n, Eigen::Index rank, dkmo::Rng& rng) {
    Matrix a = gaussian(n, rank, rng);
    return a * a.transpose();
}

inline double rel_fro(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("dkmo_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testutil
