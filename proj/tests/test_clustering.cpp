#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dkmo/clustering.hpp"
#include "dkmo/error.hpp"
#include "test_util.hpp"

using namespace dkmo::clustering;
using dkmo::linalg::Matrix;
using dkmo::linalg::Vector;

namespace {

// Two blobs with known means (0,0) and (5,5).
Matrix two_blobs(int per, double sigma, dkmo::Rng& rng) {
    Matrix x(2 * per, 2);
    for (int i = 0; i < 2 * per; ++i) {
        const double c = i < per ? 0.0 : 5.0;
        x(i, 0) = c + sigma * rng.normal();
        x(i, 1) = c + sigma * rng.normal();
    }
    return x;
}

Matrix three_blobs(int per, dkmo::Rng& rng) {
    Matrix x(3 * per, 2);
    for (int i = 0; i < 3 * per; ++i) {
        const double t = 2.0 * std::numbers::pi * (i % 3) / 3.0;
        x(i, 0) = 3.0 * std::cos(t) + 0.3 * rng.normal();
        x(i, 1) = 3.0 * std::sin(t) + 0.3 * rng.normal();
    }
    return x;
}

// Nearest landmark distance of point p.
double nearest(const Matrix& z, const Eigen::RowVectorXd& p) {
    double best = 1e300;
    for (Eigen::Index j = 0; j < z.rows(); ++j) best = std::min(best, (z.row(j) - p).norm());
    return best;
}

bool same_rows(const Matrix& a, const Matrix& b) {
    // Every row of a equals some row of b exactly, and counts match.
    if (a.rows() != b.rows()) return false;
    std::vector<bool> used(static_cast<std::size_t>(b.rows()), false);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        bool found = false;
        for (Eigen::Index j = 0; j < b.rows() && !found; ++j)
            if (!used[static_cast<std::size_t>(j)] && a.row(i) == b.row(j)) used[static_cast<std::size_t>(j)] = found = true;
        if (!found) return false;
    }
    return true;
}

double medoid_cost(const Matrix& x, const Matrix& z) {
    double c = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) c += nearest(z, x.row(i));
    return c;
}

}  // namespace

TEST(Kmeans, RequalsNReturnsPoints) {
    dkmo::Rng rng(1);
    const Matrix x = testutil::gaussian(7, 3, rng);
    EXPECT_TRUE(same_rows(kmeans(x, 7, 3).points, x));
    EXPECT_TRUE(same_rows(kmedians(x, 7, 3).points, x));
    EXPECT_TRUE(same_rows(kmedoids(x, 7, 3).points, x));
    EXPECT_TRUE(same_rows(agglomerative(x, 7).points, x));
}

TEST(Kmeans, RecoversBlobMeans) {
    dkmo::Rng rng(2);
    const Matrix x = two_blobs(100, 0.3, rng);
    const auto z = kmeans(x, 2, 9);
    const Vector m0 = x.topRows(100).colwise().mean(), m1 = x.bottomRows(100).colwise().mean();
    EXPECT_LT(nearest(z.points, m0.transpose()), 0.1);
    EXPECT_LT(nearest(z.points, m1.transpose()), 0.1);
}

TEST(Kmeans, DuplicatesSingleCluster) {
    Matrix x(4, 2);
    x.rowwise() = Eigen::RowVector2d(1.5, -2.0);
    const auto z = kmeans(x, 1, 0);
    EXPECT_EQ(z.points.row(0), Eigen::RowVector2d(1.5, -2.0));
}

TEST(Kmeans, ObjectiveNonIncreasing) {
    dkmo::Rng rng(3);
    const Matrix x = testutil::gaussian(80, 3, rng);
    for (auto* fn : {&kmeans, &kmedians}) {
        const auto z = fn(x, 6, 4, 300);
        for (std::size_t i = 1; i < z.objective.size(); ++i) EXPECT_LE(z.objective[i], z.objective[i - 1] + 1e-9);
    }
    const auto m = kmedoids(x, 6, 4, 300);
    for (std::size_t i = 1; i < m.objective.size(); ++i) EXPECT_LE(m.objective[i], m.objective[i - 1] + 1e-9);
}

TEST(Kmeans, CountError) {
    EXPECT_THROW(kmeans(Matrix::Zero(3, 2), 4, 0), dkmo::InputError);
    EXPECT_THROW(kmeans(Matrix::Zero(3, 2), 0, 0), dkmo::InputError);
}

TEST(Kmedians, MedianRobustness) {
    Matrix x(3, 2);
    x << 0, 0, 0, 0, 10, 10;
    EXPECT_EQ(kmedians(x, 1, 0).points.row(0), Eigen::RowVector2d(0, 0));
}

TEST(Kmedians, MatchesCoordinatewiseMedianOracle) {
    dkmo::Rng rng(4);
    Matrix x = two_blobs(50, 0.3, rng);
    // Outliers on the first blob.
    for (int i = 0; i < 5; ++i) x.row(i) << 40.0 + i, -30.0;
    const auto z = kmedians(x, 2, 5);
    for (int c = 0; c < 2; ++c) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            if (z.assignment[static_cast<std::size_t>(i)] == c) members.push_back(i);
        const Vector oracle = coordinatewise_median(dkmo::linalg::select_rows(x, members));
        EXPECT_LT((z.points.row(c).transpose() - oracle).norm(), 1e-12);
    }
}

TEST(CoordinatewiseMedian, EvenAndOdd) {
    Matrix x(4, 1);
    x << 4, 1, 3, 2;
    EXPECT_DOUBLE_EQ(coordinatewise_median(x)(0), 2.5);
    EXPECT_DOUBLE_EQ(coordinatewise_median(x.topRows(3))(0), 3.0);
}

TEST(Kmedoids, CollinearMiddle) {
    Matrix x(3, 1);
    x << 0, 1, 5;
    EXPECT_EQ(kmedoids(x, 1, 0).points(0, 0), 1.0);
}

TEST(Kmedoids, LandmarksAreRows) {
    dkmo::Rng rng(5);
    const Matrix x = testutil::gaussian(40, 3, rng);
    const auto z = kmedoids(x, 5, 1);
    for (Eigen::Index j = 0; j < 5; ++j) {
        bool found = false;
        for (Eigen::Index i = 0; i < x.rows(); ++i) found = found || x.row(i) == z.points.row(j);
        EXPECT_TRUE(found);
    }
}

TEST(Kmedoids, CostNotWorseThanSnappedKmeans) {
    dkmo::Rng rng(6);
    for (int t = 0; t < 5; ++t) {
        const Matrix x = testutil::gaussian(30, 2, rng);
        const auto med = kmedoids(x, 3, 7);
        // Snap each kmeans centroid to its nearest data row.
        const auto km = kmeans(x, 3, 7);
        Matrix snapped(3, 2);
        for (int j = 0; j < 3; ++j) {
            Eigen::Index best = 0;
            (x.rowwise() - km.points.row(j)).rowwise().squaredNorm().minCoeff(&best);
            snapped.row(j) = x.row(best);
        }
        EXPECT_LE(medoid_cost(x, med.points), medoid_cost(x, snapped) + 1e-9);
    }
}

TEST(Agglomerative, NestedPairs) {
    Matrix x(4, 1);
    x << 0, 0.1, 10, 10.1;
    const auto z = agglomerative(x, 2);
    EXPECT_EQ(z.assignment[0], z.assignment[1]);
    EXPECT_EQ(z.assignment[2], z.assignment[3]);
    EXPECT_NE(z.assignment[0], z.assignment[2]);
    std::vector<double> pts{z.points(0, 0), z.points(1, 0)};
    std::sort(pts.begin(), pts.end());
    EXPECT_NEAR(pts[0], 0.05, 1e-12);
    EXPECT_NEAR(pts[1], 10.05, 1e-12);
}

TEST(Agglomerative, BlobMeans) {
    dkmo::Rng rng(7);
    const Matrix x = two_blobs(60, 0.3, rng);
    const auto z = agglomerative(x, 2);
    EXPECT_LT(nearest(z.points, x.topRows(60).colwise().mean()), 0.1);
    EXPECT_LT(nearest(z.points, x.bottomRows(60).colwise().mean()), 0.1);
}

TEST(Spectral, DisconnectedCliques) {
    dkmo::Rng rng(8);
    Matrix x(24, 2);
    for (int i = 0; i < 24; ++i) {
        x(i, 0) = (i < 12 ? 0.0 : 100.0) + 0.1 * rng.normal();
        x(i, 1) = 0.1 * rng.normal();
    }
    const auto z = spectral_knn(x, 2, 5, 1);
    for (int i = 1; i < 12; ++i) EXPECT_EQ(z.assignment[static_cast<std::size_t>(i)], z.assignment[0]);
    for (int i = 13; i < 24; ++i) EXPECT_EQ(z.assignment[static_cast<std::size_t>(i)], z.assignment[12]);
    EXPECT_NE(z.assignment[0], z.assignment[12]);
}

TEST(Spectral, RingsWhereKmeansFails) {
    dkmo::Rng rng(9);
    const int n = 200;
    Matrix x(n, 2);
    std::vector<int> truth(n);
    for (int i = 0; i < n; ++i) {
        truth[static_cast<std::size_t>(i)] = i % 2;
        const double r = (i % 2 ? 3.0 : 1.0) + 0.05 * rng.normal();
        const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
        x(i, 0) = r * std::cos(t);
        x(i, 1) = r * std::sin(t);
    }
    auto agreement = [&](const std::vector<int>& a) {
        int same = 0;
        for (int i = 0; i < n; ++i) same += a[static_cast<std::size_t>(i)] == truth[static_cast<std::size_t>(i)];
        return std::max(same, n - same) / static_cast<double>(n);
    };
    EXPECT_GE(agreement(spectral_knn(x, 2, 10, 3).assignment), 0.99);
    EXPECT_LT(agreement(kmeans(x, 2, 3).assignment), 0.8);
}

TEST(Spectral, SingleLandmarkIsMean) {
    dkmo::Rng rng(10);
    const Matrix x = testutil::gaussian(30, 3, rng);
    const auto z = spectral_knn(x, 1, std::nullopt, 0);
    EXPECT_LT((z.points.row(0) - x.colwise().mean()).norm(), 1e-12);
}

TEST(Spectral, DefaultNeighbours) {
    EXPECT_EQ(default_k_neighbors(100), 10);
    EXPECT_EQ(default_k_neighbors(5000), 13);
}

TEST(Ensemble, ShapeAndOrder) {
    dkmo::Rng rng(11);
    const Matrix x = testutil::gaussian(60, 4, rng);
    const auto sets = landmark_ensemble(x, 6, 21);
    ASSERT_EQ(sets.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(sets[i].method, kEnsembleMethods[i]);
        EXPECT_EQ(sets[i].points.rows(), 6);
        EXPECT_EQ(sets[i].points.cols(), 4);
        EXPECT_TRUE(sets[i].points.allFinite());
    }
}

TEST(Ensemble, DeterministicAcrossRunsAndThreads) {
    dkmo::Rng rng(12);
    const Matrix x = testutil::gaussian(80, 3, rng);
    const auto a = landmark_ensemble(x, 7, 5);
    const auto b = landmark_ensemble(x, 7, 5, {}, 4);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a[i].points, b[i].points);
}

TEST(Ensemble, BeatsRandomLandmarksOnBlobs) {
    dkmo::Rng rng(13);
    const Matrix x = three_blobs(50, rng);
    const auto sets = landmark_ensemble(x, 3, 17);
    double random_cost = 0.0;
    for (int t = 0; t < 20; ++t) {
        dkmo::Rng pick(100 + t);
        std::vector<Eigen::Index> rows;
        for (auto i : pick.sample_without_replacement(static_cast<std::size_t>(x.rows()), 3)) rows.push_back(static_cast<Eigen::Index>(i));
        random_cost += quantization_error(x, dkmo::linalg::select_rows(x, rows)) / 20.0;
    }
    for (const auto& s : sets) EXPECT_LT(quantization_error(x, s.points), random_cost) << to_string(s.method);
}
