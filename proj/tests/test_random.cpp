#include <gtest/gtest.h>

#include <set>

#include "dkmo/random.hpp"

using dkmo::Rng;

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformInUnitInterval) {
    Rng rng(1);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / 100000, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
    Rng rng(2);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, IndexCoversRangeUniformly) {
    Rng rng(3);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[rng.index(7)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
    Rng rng(4);
    const auto s = rng.sample_without_replacement(50, 20);
    ASSERT_EQ(s.size(), 20u);
    std::set<std::size_t> unique(s.begin(), s.end());
    EXPECT_EQ(unique.size(), 20u);
    for (auto v : s) EXPECT_LT(v, 50u);
}

TEST(Rng, ShuffleIsPermutation) {
    Rng rng(5);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    rng.shuffle(std::span<int>(v));
    std::multiset<int> m(v.begin(), v.end());
    EXPECT_EQ(m, (std::multiset<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

TEST(DeriveSeed, DependsOnTagAndSeed) {
    EXPECT_EQ(dkmo::derive_seed(1, "a"), dkmo::derive_seed(1, "a"));
    EXPECT_NE(dkmo::derive_seed(1, "a"), dkmo::derive_seed(1, "b"));
    EXPECT_NE(dkmo::derive_seed(1, "a"), dkmo::derive_seed(2, "a"));
    EXPECT_NE(dkmo::derive_seed(1, std::uint64_t{0}), dkmo::derive_seed(1, std::uint64_t{1}));
}

TEST(Fnv1a, KnownVectors) {
    EXPECT_EQ(dkmo::fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(dkmo::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}
