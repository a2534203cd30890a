#include <gtest/gtest.h>

#include <array>
#include <numeric>
#include <set>
#include <vector>

#include "evoforage/rng.hpp"

using namespace evoforage;

TEST(Rng, DeriveSeedIsPureAndOrderSensitive) {
    EXPECT_EQ(derive_seed(7, {1, 2, 3}), derive_seed(7, {1, 2, 3}));
    EXPECT_NE(derive_seed(7, {1, 2, 3}), derive_seed(7, {3, 2, 1}));
    EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {1, 2, 0}));
    EXPECT_NE(derive_seed(7, {}), derive_seed(8, {}));
    static_assert(derive_seed(1, {tag("a")}) != derive_seed(1, {tag("b")}));
}

TEST(Rng, TagMatchesFnv1aReference) {
    // FNV-1a 64 of the empty string and of "a".
    EXPECT_EQ(tag(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(tag("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformInUnitInterval) {
    Rng r(1);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Rng, BelowIsUnbiasedAndInRange) {
    Rng r(3);
    std::array<int, 7> counts{};
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto v = r.below(7);
        ASSERT_LT(v, 7u);
        ++counts[v];
    }
    // chi-squared on 6 df; 22.46 is the 0.999 quantile
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
    EXPECT_LT(chi2, 22.46);
    EXPECT_EQ(r.below(0), 0u);
    EXPECT_EQ(r.below(1), 0u);
}

TEST(Rng, NormalMoments) {
    Rng r(5);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutation) {
    Rng r(9);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    r.shuffle(v.begin(), v.end());
    std::set<int> s(v.begin(), v.end());
    EXPECT_EQ(s.size(), 50u);
    EXPECT_EQ(*s.begin(), 0);
    EXPECT_EQ(*s.rbegin(), 49);
}
