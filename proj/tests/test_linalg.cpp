#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "dkmo/error.hpp"
#include "dkmo/linalg.hpp"
#include "test_util.hpp"

using namespace dkmo::linalg;
using testutil::gaussian;

TEST(SymEig, Identity) {
    const auto e = sym_eig(Matrix::Identity(3, 3));
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(e.values(i), 1.0);
}

TEST(SymEig, DiagonalGivesPermutedIdentity) {
    Matrix d = Vector(Eigen::Vector3d(2.0, 5.0, -1.0)).asDiagonal();
    const auto e = sym_eig(d);
    EXPECT_DOUBLE_EQ(e.values(0), 5.0);
    EXPECT_DOUBLE_EQ(e.values(1), 2.0);
    EXPECT_DOUBLE_EQ(e.values(2), -1.0);
    Matrix expected = Matrix::Zero(3, 3);
    expected(1, 0) = expected(0, 1) = expected(2, 2) = 1.0;
    EXPECT_LT((e.vectors - expected).norm(), 1e-14);
}

TEST(SymEig, RandomReconstruction) {
    dkmo::Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix m = testutil::random_symmetric(6, rng);
        const auto e = sym_eig(m);
        Matrix back = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
        EXPECT_LT((back - m).norm(), 1e-10);
        EXPECT_LT((e.vectors.transpose() * e.vectors - Matrix::Identity(6, 6)).norm(), 1e-10);
        for (int i = 1; i < 6; ++i) EXPECT_GE(e.values(i - 1), e.values(i));
    }
}

TEST(SymEig, MatchesIndependentSolver) {
    dkmo::Rng rng(12);
    const Matrix m = testutil::random_symmetric(30, rng);
    const auto e = sym_eig(m);
    Eigen::SelfAdjointEigenSolver<Matrix> oracle(m);
    const Vector ref = oracle.eigenvalues().reverse();
    EXPECT_LT((e.values - ref).norm(), 1e-10);
}

TEST(SymEig, SignConvention) {
    dkmo::Rng rng(13);
    const auto e = sym_eig(testutil::random_symmetric(8, rng));
    for (Eigen::Index j = 0; j < 8; ++j) {
        Eigen::Index arg = 0;
        e.vectors.col(j).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(e.vectors(arg, j), 0.0);
    }
}

TEST(SymEig, RejectsBadInput) {
    EXPECT_THROW(sym_eig(Matrix::Zero(2, 3)), dkmo::ShapeError);
    Matrix a = Matrix::Identity(3, 3);
    a(0, 1) = 1e-3;
    EXPECT_THROW(sym_eig(a), dkmo::SymmetryError);
}

TEST(SymEig, ReconstructionUpTo50) {
    dkmo::Rng rng(14);
    for (int n : {1, 2, 10, 50}) {
        const Matrix m = testutil::random_symmetric(n, rng);
        EXPECT_LT(testutil::rel_fro(reconstruct(sym_eig(m)), m), 1e-8) << n;
    }
}

TEST(TruncatedSvd, RankOneExact) {
    dkmo::Rng rng(15);
    const Matrix u = gaussian(6, 1, rng), v = gaussian(4, 1, rng);
    const Matrix m = u * v.transpose();
    const auto s = truncated_svd(m, 1);
    EXPECT_LT((s.u * s.s.asDiagonal() * s.v.transpose() - m).norm(), 1e-10);
}

TEST(TruncatedSvd, Diagonal) {
    Matrix d = Vector(Eigen::Vector4d(4, 3, 2, 1)).asDiagonal();
    const auto s = truncated_svd(d, 2);
    EXPECT_NEAR(s.s(0), 4.0, 1e-12);
    EXPECT_NEAR(s.s(1), 3.0, 1e-12);
}

TEST(TruncatedSvd, EckartYoungAgainstFullSvd) {
    dkmo::Rng rng(16);
    const Matrix m = gaussian(8, 5, rng);
    const auto s = truncated_svd(m, 3);
    Eigen::JacobiSVD<Matrix> oracle(m);
    const Vector& sv = oracle.singularValues();
    const double optimal = std::sqrt(sv(3) * sv(3) + sv(4) * sv(4));
    const double err = (m - s.u * s.s.asDiagonal() * s.v.transpose()).norm();
    EXPECT_NEAR(err, optimal, 1e-8);
    EXPECT_LT((s.u.transpose() * s.u - Matrix::Identity(3, 3)).norm(), 1e-8);
    EXPECT_LT((s.v.transpose() * s.v - Matrix::Identity(3, 3)).norm(), 1e-8);
}

TEST(TruncatedSvd, WideAndTallUpTo50) {
    dkmo::Rng rng(17);
    for (auto [r, c] : {std::pair{50, 20}, std::pair{20, 50}, std::pair{30, 30}}) {
        const Matrix m = gaussian(r, c, rng);
        Eigen::JacobiSVD<Matrix> oracle(m);
        for (int k : {1, 5, 19}) {
            const auto s = truncated_svd(m, k);
            const double err = (m - s.u * s.s.asDiagonal() * s.v.transpose()).norm();
            const double opt = oracle.singularValues().tail(oracle.singularValues().size() - k).norm();
            EXPECT_NEAR(err, opt, 1e-8);
        }
    }
}

TEST(TruncatedSvd, RankOutOfRange) {
    EXPECT_THROW(truncated_svd(Matrix::Identity(3, 3), 0), dkmo::RankError);
    EXPECT_THROW(truncated_svd(Matrix::Identity(3, 2), 3), dkmo::RankError);
}

TEST(InverseSqrtPsd, Identity) { EXPECT_LT((inverse_sqrt_psd(Matrix::Identity(4, 4)) - Matrix::Identity(4, 4)).norm(), 1e-14); }

TEST(InverseSqrtPsd, Diagonal) {
    Matrix d = Vector(Eigen::Vector2d(4, 1)).asDiagonal();
    const Matrix r = inverse_sqrt_psd(d);
    EXPECT_NEAR(r(0, 0), 0.5, 1e-14);
    EXPECT_NEAR(r(1, 1), 1.0, 1e-14);
    EXPECT_NEAR(r(0, 1), 0.0, 1e-14);
}

TEST(InverseSqrtPsd, WhitensRandomPd) {
    dkmo::Rng rng(18);
    const Matrix m = testutil::random_pd(5, rng);
    const Matrix r = inverse_sqrt_psd(m);
    EXPECT_LT((r * m * r - Matrix::Identity(5, 5)).norm(), 1e-6);
    EXPECT_LT((r * r * m - Matrix::Identity(5, 5)).norm(), 1e-6);
    EXPECT_TRUE(is_symmetric(r));
}

TEST(InverseSqrtPsd, RejectsIndefinite) {
    Matrix d = Vector(Eigen::Vector2d(1, -0.5)).asDiagonal();
    EXPECT_THROW(inverse_sqrt_psd(d), dkmo::NotPsdError);
}

TEST(InverseSqrtPsd, FloorsRankDeficient) {
    dkmo::Rng rng(19);
    const Matrix m = testutil::random_psd_rank(6, 3, rng);
    const Matrix r = inverse_sqrt_psd(m);
    EXPECT_TRUE(all_finite(r));
}

TEST(PsdClip, FixedPointOnPsd) {
    dkmo::Rng rng(20);
    const Matrix m = testutil::random_pd(6, rng);
    EXPECT_LT((psd_clip(m) - m).norm(), 1e-10);
}

TEST(PsdClip, Diagonal) {
    Matrix d = Vector(Eigen::Vector2d(1, -2)).asDiagonal();
    const Matrix c = psd_clip(d);
    EXPECT_NEAR(c(0, 0), 1.0, 1e-14);
    EXPECT_NEAR(c(1, 1), 0.0, 1e-14);
}

TEST(PsdClip, NearestPsdAgainstClipOracle) {
    dkmo::Rng rng(21);
    // Correlation-style matrix with one negative eigenvalue.
    Matrix c(4, 4);
    c << 1.0, 0.9, 0.9, -0.6, 0.9, 1.0, 0.9, 0.1, 0.9, 0.9, 1.0, 0.9, -0.6, 0.1, 0.9, 1.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(c);
    ASSERT_LT(es.eigenvalues()(0), 0.0);
    const Matrix oracle = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
    const Matrix clipped = psd_clip(c);
    EXPECT_LT((clipped - oracle).norm(), 1e-10);
    Eigen::SelfAdjointEigenSolver<Matrix> after(clipped);
    EXPECT_GE(after.eigenvalues()(0), -1e-10);
    // No other PSD matrix along random directions is closer.
    for (int t = 0; t < 20; ++t) {
        Matrix probe = clipped + 0.05 * testutil::random_symmetric(4, rng);
        Eigen::SelfAdjointEigenSolver<Matrix> pe(probe);
        if (pe.eigenvalues()(0) < 0) continue;
        EXPECT_GE((probe - c).norm(), (clipped - c).norm() - 1e-12);
    }
}

TEST(PsdClip, Idempotent) {
    dkmo::Rng rng(22);
    for (int t = 0; t < 10; ++t) {
        const Matrix m = testutil::random_symmetric(7, rng);
        const Matrix once = psd_clip(m);
        EXPECT_LT((psd_clip(once) - once).norm(), 1e-10);
    }
}

TEST(PsdClip, RejectsAsymmetric) {
    Matrix a = Matrix::Identity(2, 2);
    a(0, 1) = 0.5;
    EXPECT_THROW(psd_clip(a), dkmo::SymmetryError);
}

TEST(Select, Submatrix) {
    Matrix m(3, 3);
    m << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    const std::vector<Eigen::Index> rows{2, 0}, cols{1};
    const Matrix s = select(m, rows, cols);
    ASSERT_EQ(s.rows(), 2);
    EXPECT_EQ(s(0, 0), 8);
    EXPECT_EQ(s(1, 0), 2);
}
