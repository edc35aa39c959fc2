#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <numbers>
#include <set>

#include "dkmo/error.hpp"
#include "dkmo/kernels.hpp"
#include "dkmo/nystroem.hpp"
#include "test_util.hpp"

using namespace dkmo::nystroem;
using dkmo::kernels::KernelMatrix;
using dkmo::linalg::Matrix;
using Index = Eigen::Index;

namespace {

std::vector<Index> iota(Index n) {
    std::vector<Index> v(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

// Optimal rank-r Frobenius error of a symmetric PSD matrix.
double optimal_error(const Matrix& k, Index r) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    const auto ev = es.eigenvalues();  // ascending
    return ev.head(ev.size() - r).norm();
}

// Eq. reference form: E W_r^+ E^T with W_r the top-r part of W.
Matrix pseudo_inverse_form(const Matrix& k, const std::vector<Index>& cols, Index r) {
    const Matrix e = dkmo::linalg::select_cols(k, cols);
    const Matrix w = dkmo::linalg::select(k, cols, cols);
    Eigen::SelfAdjointEigenSolver<Matrix> es(w);
    const Index s = w.rows();
    Matrix pinv = Matrix::Zero(s, s);
    for (Index i = s - r; i < s; ++i) pinv += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / es.eigenvalues()(i);
    return e * pinv * e.transpose();
}

Matrix blobs(int n, dkmo::Rng& rng) {
    Matrix x(n, 2);
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * (i % 3) / 3.0;
        x(i, 0) = 3.0 * std::cos(t) + 0.3 * rng.normal();
        x(i, 1) = 3.0 * std::sin(t) + 0.3 * rng.normal();
    }
    return x;
}

}  // namespace

TEST(Conventional, FullSelectionExact) {
    dkmo::Rng rng(1);
    const KernelMatrix k(testutil::random_pd(20, rng));
    const auto e = conventional_single(k, iota(20), 20);
    EXPECT_LT(testutil::rel_fro(e.values * e.values.transpose(), k.values()), 1e-6);
}

TEST(Conventional, IdentityFirstColumn) {
    const KernelMatrix k(Matrix::Identity(5, 5));
    const std::vector<Index> cols{0};
    const auto e = conventional_single(k, cols, 1);
    Matrix expected = Matrix::Zero(5, 1);
    expected(0, 0) = 1.0;
    EXPECT_LT((e.values - expected).norm(), 1e-15);
}

TEST(Conventional, MatchesPseudoInverseForm) {
    dkmo::Rng rng(2);
    const KernelMatrix k(testutil::random_pd(20, rng));
    const std::vector<Index> cols{3, 7, 1, 12, 19, 5, 8, 0};
    const auto e = conventional_single(k, cols, 5);
    EXPECT_LT((e.values * e.values.transpose() - pseudo_inverse_form(k.values(), cols, 5)).norm(), 1e-8);
}

TEST(Conventional, EckartYoungLowerBound) {
    dkmo::Rng rng(3);
    for (int t = 0; t < 10; ++t) {
        const KernelMatrix k(testutil::random_psd_rank(20, 12, rng));
        const auto draw = rng.sample_without_replacement(20, 8);
        std::vector<Index> cols(draw.begin(), draw.end());
        const auto e = conventional_single(k, cols, 5);
        EXPECT_GE((k.values() - e.values * e.values.transpose()).norm(), optimal_error(k.values(), 5) - 1e-8);
    }
}

TEST(Conventional, Errors) {
    const KernelMatrix k(Matrix::Identity(4, 4));
    const std::vector<Index> cols{0, 1}, dup{1, 1}, out{0, 4};
    EXPECT_THROW(conventional_single(k, cols, 3), dkmo::RankError);
    EXPECT_THROW(conventional_single(k, dup, 1), dkmo::InputError);
    EXPECT_THROW(conventional_single(k, out, 1), dkmo::InputError);
}

TEST(Conventional, ReducedEffectiveRank) {
    dkmo::Rng rng(4);
    const KernelMatrix k(testutil::random_psd_rank(12, 2, rng));
    const auto e = conventional_single(k, iota(6), 4);
    const auto& src = std::get<ConventionalSource>(e.source);
    EXPECT_EQ(src.rank, 4);
    EXPECT_EQ(src.effective_rank, 2);
    EXPECT_TRUE(e.values.allFinite());
}

TEST(Conventional, OutOfSampleReproducesTrainingRows) {
    dkmo::Rng rng(5);
    const KernelMatrix k(testutil::random_pd(15, rng));
    const std::vector<Index> cols{2, 4, 6, 8, 10};
    const auto e = conventional_single(k, cols, 4);
    EXPECT_LT((e.embed_kernel_rows(k.values()) - e.values).norm(), 1e-10);
    EXPECT_THROW(e.embed_features(Matrix::Zero(2, 3)), dkmo::BindingError);
}

TEST(ConventionalEnsemble, DisjointGroups) {
    dkmo::Rng rng(6);
    const KernelMatrix k(testutil::random_pd(20, rng));
    const auto ens = conventional_ensemble(k, 3, 4, 3, 99);
    ASSERT_EQ(ens.size(), 3);
    std::set<Index> all;
    for (const auto& m : ens.members) {
        const auto& cols = std::get<ConventionalSource>(m.source).columns;
        EXPECT_EQ(cols.size(), 4u);
        all.insert(cols.begin(), cols.end());
    }
    EXPECT_EQ(all.size(), 12u);
    EXPECT_THROW(conventional_ensemble(k, 6, 4, 3, 1), dkmo::InputError);
}

TEST(ConventionalEnsemble, SingleFullMember) {
    dkmo::Rng rng(7);
    const KernelMatrix k(testutil::random_pd(10, rng));
    const auto ens = conventional_ensemble(k, 1, 10, 10, 3);
    EXPECT_LT(testutil::rel_fro(ens.members[0].values * ens.members[0].values.transpose(), k.values()), 1e-6);
}

TEST(ConventionalEnsemble, ErrorShrinksWithSubsetSize) {
    dkmo::Rng rng(8);
    const KernelMatrix k = dkmo::kernels::rbf_kernel(blobs(120, rng), 0.2);
    auto mean_error = [&](Index s) {
        double total = 0.0;
        for (int seed = 0; seed < 5; ++seed) {
            const auto ens = conventional_ensemble(k, 6, s, s, static_cast<std::uint64_t>(seed));
            for (const auto& m : ens.members) total += (k.values() - m.values * m.values.transpose()).norm();
        }
        return total;
    };
    EXPECT_GT(mean_error(4), mean_error(8));
    EXPECT_GT(mean_error(8), mean_error(16));
}

TEST(VariedEnsemble, ExactSingleMember) {
    dkmo::Rng rng(9);
    const KernelMatrix k(testutil::random_pd(8, rng));
    const auto ens = varied_ensemble(k, {{8, 8}}, 1);
    EXPECT_LT(testutil::rel_fro(ens.members[0].values * ens.members[0].values.transpose(), k.values()), 1e-6);
}

TEST(VariedEnsemble, RecordsSchedule) {
    dkmo::Rng rng(10);
    const KernelMatrix k(testutil::random_pd(60, rng));
    const Schedule sched{{4, 2}, {5, 3}, {6, 4}, {7, 5}, {8, 6}, {9, 7}};
    const auto ens = varied_ensemble(k, sched, 2);
    ASSERT_EQ(ens.size(), 6);
    for (std::size_t p = 0; p < 6; ++p) {
        const auto& src = std::get<ConventionalSource>(ens.members[p].source);
        EXPECT_EQ(static_cast<Index>(src.columns.size()), sched[p].first);
        EXPECT_EQ(src.rank, sched[p].second);
        EXPECT_EQ(ens.members[p].width(), sched[p].second);
    }
    EXPECT_THROW(varied_ensemble(k, {{3, 4}}, 1), dkmo::Error);
}

TEST(VariedEnsemble, DisjointWhenScheduleFits) {
    dkmo::Rng rng(11);
    const KernelMatrix k = dkmo::kernels::rbf_kernel(blobs(200, rng), 0.3);
    Schedule sched;
    for (const auto& [s, r] : default_schedule(200)) sched.emplace_back(s / 3, std::min(r, s / 3));
    Index total = 0;
    for (const auto& [s, r] : sched) total += s;
    ASSERT_LE(total, 200);
    const auto ens = varied_ensemble(k, sched, 5);
    std::set<Index> all;
    for (const auto& m : ens.members) {
        const auto& c = std::get<ConventionalSource>(m.source).columns;
        all.insert(c.begin(), c.end());
    }
    EXPECT_EQ(static_cast<Index>(all.size()), total);
}

TEST(VariedEnsemble, OverfullScheduleDrawsPerGroup) {
    dkmo::Rng rng(12);
    const KernelMatrix k(testutil::random_pd(10, rng));
    const auto ens = varied_ensemble(k, {{8, 4}, {8, 4}}, 5);
    for (const auto& m : ens.members) {
        const auto& c = std::get<ConventionalSource>(m.source).columns;
        EXPECT_EQ(std::set<Index>(c.begin(), c.end()).size(), 8u);
    }
}

TEST(DefaultSchedule, Values) {
    const auto s = default_schedule(200);
    ASSERT_EQ(s.size(), 6u);
    const std::vector<Index> expected{13, 17, 25, 34, 50, 67};
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(s[i].first, expected[i]);
        EXPECT_EQ(s[i].second, std::min<Index>(expected[i], 128));
    }
    EXPECT_EQ(default_schedule(1200)[5].second, 128);
    EXPECT_EQ(default_schedule(2)[0].first, 1);
}

TEST(Clustered, FullLandmarksExact) {
    dkmo::Rng rng(13);
    const Matrix x = testutil::gaussian(25, 3, rng);
    dkmo::kernels::KernelFunction f{dkmo::kernels::KernelKind::rbf, 0.3, false};
    dkmo::clustering::LandmarkSet z;
    z.points = x;
    const auto e = clustered_embed(x, z, f);
    const Matrix k = dkmo::kernels::kernel_from_features(x, f, "k").values();
    EXPECT_LT(testutil::rel_fro(e.values * e.values.transpose(), k), 1e-6);
}

TEST(Clustered, SingleLandmarkColumn) {
    dkmo::Rng rng(14);
    const Matrix x = testutil::gaussian(10, 2, rng);
    dkmo::kernels::KernelFunction f{dkmo::kernels::KernelKind::rbf, 0.5, false};
    dkmo::clustering::LandmarkSet z;
    z.points = Matrix::Zero(1, 2);
    const auto e = clustered_embed(x, z, f);
    for (Index i = 0; i < 10; ++i) EXPECT_NEAR(e.values(i, 0), std::exp(-0.5 * x.row(i).squaredNorm()), 1e-14);
}

TEST(Clustered, DimensionMismatch) {
    dkmo::clustering::LandmarkSet z;
    z.points = Matrix::Zero(1, 3);
    EXPECT_THROW(clustered_embed(Matrix::Zero(4, 2), z, {}), dkmo::ShapeError);
}

TEST(Clustered, KmeansBeatsRandomLandmarks) {
    dkmo::Rng rng(15);
    const Matrix x = blobs(150, rng);
    dkmo::kernels::KernelFunction f{dkmo::kernels::KernelKind::rbf, 0.5, false};
    const Matrix k = dkmo::kernels::kernel_from_features(x, f, "k").values();
    double clustered = 0.0, random = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        const auto z = dkmo::clustering::kmeans(x, 10, static_cast<std::uint64_t>(seed));
        const auto e = clustered_embed(x, z, f);
        clustered += (k - e.values * e.values.transpose()).norm();
        dkmo::Rng pick(1000 + seed);
        std::vector<Index> rows;
        for (auto i : pick.sample_without_replacement(150, 10)) rows.push_back(static_cast<Index>(i));
        dkmo::clustering::LandmarkSet rz;
        rz.points = dkmo::linalg::select_rows(x, rows);
        const auto re = clustered_embed(x, rz, f);
        random += (k - re.values * re.values.transpose()).norm();
    }
    EXPECT_LT(clustered, random);
}

TEST(Clustered, OutOfSampleReproducesTrainingRows) {
    dkmo::Rng rng(16);
    const Matrix x = testutil::gaussian(30, 2, rng);
    dkmo::kernels::KernelFunction f{dkmo::kernels::KernelKind::rbf, 0.5, false};
    const auto e = clustered_embed(x, dkmo::clustering::kmeans(x, 5, 1), f);
    EXPECT_LT((e.embed_features(x) - e.values).norm(), 1e-12);
    EXPECT_THROW(e.embed_kernel_rows(Matrix::Zero(1, 30)), dkmo::BindingError);
}

TEST(Clustered, SameColumnSpaceAsConventional) {
    dkmo::Rng rng(17);
    const Matrix x = testutil::gaussian(20, 2, rng);
    dkmo::kernels::KernelFunction f{dkmo::kernels::KernelKind::rbf, 0.4, false};
    const KernelMatrix k = dkmo::kernels::kernel_from_features(x, f, "k");
    const std::vector<Index> cols{1, 4, 9, 15, 18};
    const auto conv = conventional_single(k, cols, 5);
    dkmo::clustering::LandmarkSet z;
    z.points = dkmo::linalg::select_rows(x, cols);
    const auto clus = clustered_embed(x, z, f);
    // Project clustered columns onto span(conventional) and measure the residual.
    const Matrix q = conv.values.householderQr().householderQ() * Matrix::Identity(20, 5);
    const Matrix residual = clus.values - q * (q.transpose() * clus.values);
    EXPECT_LT(residual.norm() / clus.values.norm(), 1e-6);
}

TEST(ClusteredEnsemble, ShapeAndDeterminism) {
    dkmo::Rng rng(18);
    const Matrix x = blobs(90, rng);
    dkmo::kernels::KernelFunction f{dkmo::kernels::KernelKind::rbf, 0.5, false};
    const auto a = clustered_ensemble(x, 8, f, 3);
    const auto b = clustered_ensemble(x, 8, f, 3, {}, {}, 3);
    ASSERT_EQ(a.size(), 5);
    for (std::size_t p = 0; p < 5; ++p) {
        EXPECT_EQ(a.members[p].values.rows(), 90);
        EXPECT_EQ(a.members[p].values.cols(), 8);
        EXPECT_EQ(a.members[p].values, b.members[p].values);
    }
}

TEST(ClusteredEnsemble, EveryMemberBeatsRandomLandmarks) {
    dkmo::Rng rng(19);
    const Matrix x = blobs(150, rng);
    dkmo::kernels::KernelFunction f{dkmo::kernels::KernelKind::rbf, 0.5, false};
    const Matrix k = dkmo::kernels::kernel_from_features(x, f, "k").values();
    double random = 0.0;
    for (int t = 0; t < 10; ++t) {
        dkmo::Rng pick(500 + t);
        std::vector<Index> rows;
        for (auto i : pick.sample_without_replacement(150, 6)) rows.push_back(static_cast<Index>(i));
        dkmo::clustering::LandmarkSet rz;
        rz.points = dkmo::linalg::select_rows(x, rows);
        const auto re = clustered_embed(x, rz, f);
        random += (k - re.values * re.values.transpose()).norm() / 10.0;
    }
    const auto ens = clustered_ensemble(x, 6, f, 4);
    for (const auto& m : ens.members) EXPECT_LT((k - m.values * m.values.transpose()).norm(), random) << m.describe();
}

TEST(Embeddings, PsdReconstruction) {
    dkmo::Rng rng(20);
    const KernelMatrix k(testutil::random_pd(20, rng));
    const auto e = conventional_single(k, std::vector<Index>{0, 3, 5, 7, 11, 13}, 4);
    Eigen::SelfAdjointEigenSolver<Matrix> es(e.values * e.values.transpose());
    EXPECT_GE(es.eigenvalues()(0), -1e-8);
}
