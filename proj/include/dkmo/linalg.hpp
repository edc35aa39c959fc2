#pragma once

#include <optional>
#include <span>

#include <Eigen/Dense>

// Dense matrix primitives. Eigen provides the storage and BLAS-level
// arithmetic; the symmetric eigensolver is a cyclic Jacobi implementation so
// results are deterministic and independent of any LAPACK backend.
namespace dkmo::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct EigenDecomposition {
    Vector values;   // non-increasing
    Matrix vectors;  // column i pairs with values(i)
};

struct SvdResult {
    Matrix u;
    Vector s;  // non-increasing
    Matrix v;
};

inline constexpr double kSymmetryTolerance = 1e-8;

bool is_symmetric(const Matrix& m, double tol = kSymmetryTolerance);
double max_asymmetry(const Matrix& m);
bool all_finite(const Matrix& m);

// Full spectrum of a symmetric matrix, eigenvalues descending. Each
// eigenvector's largest-magnitude entry (lowest index on ties) is positive.
// Throws ShapeError / SymmetryError.
EigenDecomposition sym_eig(const Matrix& m);

// Top-r singular triplets, computed from the eigendecomposition of the
// smaller Gram matrix. Throws RankError unless 1 <= r <= min(rows, cols).
SvdResult truncated_svd(const Matrix& m, Eigen::Index r);

// U diag(max(lambda, eps))^{-1/2} U^T. When eps is omitted the floor is
// 1e-10 times the largest eigenvalue. Throws NotPsdError when an eigenvalue
// falls below -1e-6 * max(1, lambda_max).
Matrix inverse_sqrt_psd(const Matrix& m, std::optional<double> eps = std::nullopt);

// Nearest PSD matrix in Frobenius norm: negative eigenvalues set to zero.
Matrix psd_clip(const Matrix& m);

// Reassembles U diag(values) U^T.
Matrix reconstruct(const EigenDecomposition& e);

// Submatrix m[rows, cols].
Matrix select(const Matrix& m, std::span<const Eigen::Index> rows, std::span<const Eigen::Index> cols);
Matrix select_rows(const Matrix& m, std::span<const Eigen::Index> rows);
Matrix select_cols(const Matrix& m, std::span<const Eigen::Index> cols);

}  // namespace dkmo::linalg
