#include <gtest/gtest.h>

#include <cmath>

#include "evoforage/rng.hpp"
#include "evoforage/stats.hpp"
#include "oracles.hpp"

using namespace evoforage;

namespace {

std::vector<SampleGroup> groups_of(std::initializer_list<std::vector<double>> values) {
    std::vector<SampleGroup> g;
    int i = 0;
    for (const auto& v : values) g.push_back({"g" + std::to_string(++i), v});
    return g;
}

// Small integer-valued samples so ties are common.
std::vector<double> tied_sample(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng.below(5));
    return v;
}

// Exact permutation p of H over all assignments of the pooled values.
double kruskal_exact_p(const std::vector<std::vector<double>>& groups) {
    std::vector<double> pooled;
    std::vector<int> label;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (double v : groups[g]) {
            pooled.push_back(v);
            label.push_back(static_cast<int>(g));
        }
    auto h_of = [&](const std::vector<int>& lab) {
        std::vector<SampleGroup> sg(groups.size());
        for (std::size_t i = 0; i < pooled.size(); ++i) sg[static_cast<std::size_t>(lab[i])].values.push_back(pooled[i]);
        return kruskal_wallis(sg).statistic;
    };
    const double obs = h_of(label);
    std::sort(label.begin(), label.end());
    long total = 0, extreme = 0;
    do {
        ++total;
        extreme += h_of(label) >= obs - 1e-9;
    } while (std::next_permutation(label.begin(), label.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace

TEST(Ranks, AverageTies) {
    const std::vector<double> v{3, 1, 3, 2, 3};
    EXPECT_EQ(average_ranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
    EXPECT_EQ(tie_term(v), 27.0 - 3.0);
    EXPECT_EQ(average_ranks(v), oracle::midranks(v));
}

TEST(Quantile, Type7) {
    const std::vector<double> s{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile_sorted(s, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(median({5, 1, 3}), 3.0);
}

TEST(Kruskal, TextbookSeparatedGroups) {
    const auto g = groups_of({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    const TestResult r = kruskal_wallis(g);
    EXPECT_NEAR(r.statistic, 7.2, 1e-9);
    EXPECT_NEAR(r.p_value, std::exp(-3.6), 1e-9);  // chi-squared(2) survival
    EXPECT_NEAR(r.p_value, 0.0273, 5e-5);
    ASSERT_TRUE(r.effect_size);
    EXPECT_NEAR(*r.effect_size, (7.2 - 3 + 1) / (9 - 3), 1e-12);
    // Exact permutation p for this arrangement: 6 of 1680 label assignments reach H = 7.2.
    EXPECT_NEAR(kruskal_exact_p({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}), 6.0 / 1680.0, 1e-12);
}

TEST(Kruskal, IdenticalValuesGiveNoEffect) {
    const TestResult r = kruskal_wallis(groups_of({{2, 2}, {2, 2, 2}, {2}}));
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_EQ(r.p_value, 1.0);
    const TestResult same = kruskal_wallis(groups_of({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
    EXPECT_NEAR(same.statistic, 0.0, 1e-12);
    EXPECT_NEAR(same.p_value, 1.0, 1e-12);
    EXPECT_EQ(*same.effect_size, 0.0);
}

TEST(Kruskal, TwoGroupsEqualsSquaredMannWhitneyZ) {
    Rng rng(1);
    for (int k = 0; k < 50; ++k) {
        const auto a = tied_sample(rng, 6 + rng.below(10)), b = tied_sample(rng, 6 + rng.below(10));
        std::vector<SampleGroup> g{{"a", a}, {"b", b}};
        double all_same = true;
        for (double x : a) all_same = all_same && x == a[0];
        for (double x : b) all_same = all_same && x == a[0];
        if (all_same) continue;
        const double h = kruskal_wallis(g).statistic;
        // Uncorrected z^2 of U with tie-adjusted variance.
        const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size()), n = n1 + n2;
        std::vector<double> pooled(a);
        pooled.insert(pooled.end(), b.begin(), b.end());
        const double var = n1 * n2 / 12.0 * ((n + 1) - tie_term(pooled) / (n * (n - 1)));
        const double u = oracle::mann_whitney_u(a, b);
        EXPECT_NEAR(h, (u - n1 * n2 / 2) * (u - n1 * n2 / 2) / var, 1e-9);
    }
}

TEST(Kruskal, EffectSizeInUnitRangeAndRankInvariant) {
    Rng rng(2);
    for (int k = 0; k < 100; ++k) {
        std::vector<SampleGroup> g(3 + rng.below(3));
        for (auto& s : g) s.values = tied_sample(rng, 2 + rng.below(6));
        const TestResult r = kruskal_wallis(g);
        ASSERT_GE(*r.effect_size, 0.0);
        ASSERT_LE(*r.effect_size, 1.0);
        ASSERT_GE(r.p_value, 0.0);
        ASSERT_LE(r.p_value, 1.0);
        auto t = g;
        for (auto& s : t)
            for (auto& v : s.values) v = std::exp(v) * 3 - 7;
        const TestResult rt = kruskal_wallis(t);
        ASSERT_NEAR(rt.statistic, r.statistic, 1e-12);
    }
}

TEST(Dunn, IdenticalGroupsAndBonferroniBounds) {
    const DunnResult same = dunn_posthoc(groups_of({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
    for (const auto& row : same.p_adjusted)
        for (double p : row) EXPECT_NEAR(p, 1.0, 1e-12);
    Rng rng(3);
    for (int k = 0; k < 200; ++k) {
        std::vector<SampleGroup> g(2 + rng.below(4));
        for (auto& s : g) s.values = tied_sample(rng, 3 + rng.below(6));
        const DunnResult d = dunn_posthoc(g);
        const std::size_t m = g.size() * (g.size() - 1) / 2;
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = 0; j < g.size(); ++j) {
                if (i == j) continue;
                ASSERT_GE(d.p_adjusted[i][j], d.p_raw[i][j]);
                ASSERT_LE(d.p_adjusted[i][j], 1.0);
                ASSERT_NEAR(d.p_adjusted[i][j], std::min(1.0, d.p_raw[i][j] * static_cast<double>(m)), 1e-15);
                ASSERT_NEAR(d.z[i][j], -d.z[j][i], 1e-12);
            }
    }
}

TEST(Dunn, FourGroupsUseSixComparisons) {
    // Overlapping groups: raw p above 1/6 caps at 1.
    const DunnResult d = dunn_posthoc(groups_of({{1, 5, 9, 13}, {2, 6, 10, 14}, {3, 7, 11, 15}, {4, 8, 12, 16}}));
    EXPECT_GT(d.p_raw[0][1], 1.0 / 6.0);
    EXPECT_EQ(d.p_adjusted[0][1], 1.0);
    EXPECT_NEAR(d.p_adjusted[0][3], std::min(1.0, 6 * d.p_raw[0][3]), 1e-15);
}

TEST(Dunn, FlagsStrictlyDecreasingGroups) {
    std::vector<SampleGroup> g;
    for (int s = 1; s <= 4; ++s) {
        SampleGroup grp{"s" + std::to_string(s), {}};
        for (int i = 0; i < 20; ++i) grp.values.push_back(400.0 - 60.0 * s + i);
        g.push_back(grp);
    }
    const DunnResult d = dunn_posthoc(g);
    EXPECT_LT(d.p_adjusted[0][3], 0.05);
    EXPECT_GT(d.z[0][3], 0.0);
}

TEST(Spearman, HandValues) {
    const std::vector<double> x{1, 2, 3, 4};
    EXPECT_NEAR(spearman(x, std::vector<double>{1, 3, 2, 4}).statistic, 0.8, 1e-12);
    EXPECT_NEAR(spearman(x, std::vector<double>{2, 4, 6, 100}).statistic, 1.0, 1e-12);
    EXPECT_NEAR(spearman(x, std::vector<double>{9, 7, 5, 3}).statistic, -1.0, 1e-12);
    EXPECT_THROW(spearman(x, std::vector<double>{2, 2, 2, 2}), StatsError);
    EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(Spearman, ExactPMatchesPermutationOracle) {
    const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
    EXPECT_NEAR(spearman(x, y).p_value, oracle::spearman_exact_p(x, y), 1e-12);
    Rng rng(4);
    for (int k = 0; k < 150; ++k) {
        const std::size_t n = 3 + rng.below(6);
        const auto a = tied_sample(rng, n), b = tied_sample(rng, n);
        TestResult r;
        try {
            r = spearman(a, b);
        } catch (const StatsError&) {
            continue;
        }
        ASSERT_NEAR(r.statistic, oracle::spearman_rho(a, b), 1e-12);
        ASSERT_NEAR(r.p_value, oracle::spearman_exact_p(a, b), 1e-12);
    }
}

TEST(Spearman, LargeSampleUsesTApproximation) {
    Rng rng(5);
    std::vector<double> x(40), y(40);
    for (std::size_t i = 0; i < 40; ++i) {
        x[i] = static_cast<double>(i);
        y[i] = static_cast<double>(i) + rng.normal(0.0, 15.0);
    }
    const TestResult r = spearman(x, y);
    const double t = r.statistic * std::sqrt(38 / (1 - r.statistic * r.statistic));
    EXPECT_GT(r.statistic, 0.0);
    EXPECT_LT(r.p_value, 0.05);
    EXPECT_GT(t, 2.0);
}

TEST(MannWhitney, SeparationAndIdenticalSamples) {
    const std::vector<double> lo{1, 2, 3}, hi{4, 5, 6, 7};
    EXPECT_EQ(mann_whitney_u(lo, hi).statistic, 0.0);
    EXPECT_EQ(mann_whitney_u(hi, lo).statistic, 12.0);
    EXPECT_NEAR(mann_whitney_u(lo, hi).p_value, 2.0 / 35.0, 1e-12);
    EXPECT_NEAR(mann_whitney_u(lo, hi, Alternative::less).p_value, 1.0 / 35.0, 1e-12);
    const std::vector<double> a{1, 2, 2, 5}, b{5, 2, 1, 2};
    EXPECT_GE(mann_whitney_u(a, b).p_value, 0.99);
}

TEST(MannWhitney, ExactMatchesEnumerationOracle) {
    Rng rng(6);
    for (int k = 0; k < 300; ++k) {
        const std::size_t n1 = 1 + rng.below(6), n2 = 1 + rng.below(6);
        const auto a = tied_sample(rng, n1), b = tied_sample(rng, n2);
        ASSERT_EQ(mann_whitney_u(a, b).statistic, oracle::mann_whitney_u(a, b));
        ASSERT_NEAR(mann_whitney_u(a, b).p_value, oracle::mann_whitney_exact_p(a, b, oracle::Side::two_sided), 1e-10);
        ASSERT_NEAR(mann_whitney_u(a, b, Alternative::less).p_value,
                    oracle::mann_whitney_exact_p(a, b, oracle::Side::less), 1e-10);
        ASSERT_NEAR(mann_whitney_u(a, b, Alternative::greater).p_value,
                    oracle::mann_whitney_exact_p(a, b, oracle::Side::greater), 1e-10);
    }
}

TEST(MannWhitney, NormalApproximationCloseToExactJustAboveLimit) {
    // 9 + 9 values: beyond enumeration in the library, still feasible for the oracle.
    Rng rng(7);
    for (int k = 0; k < 10; ++k) {
        std::vector<double> a(9), b(9);
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal(0.7, 1.0);
        EXPECT_NEAR(mann_whitney_u(a, b).p_value, oracle::mann_whitney_exact_p(a, b, oracle::Side::two_sided), 0.02);
    }
}

TEST(MannWhitney, RankInvariant) {
    Rng rng(8);
    for (int k = 0; k < 50; ++k) {
        auto a = tied_sample(rng, 12), b = tied_sample(rng, 15);
        const TestResult r = mann_whitney_u(a, b);
        for (auto& v : a) v = std::cbrt(v) - 2;
        for (auto& v : b) v = std::cbrt(v) - 2;
        const TestResult t = mann_whitney_u(a, b);
        EXPECT_EQ(r.statistic, t.statistic);
        EXPECT_NEAR(r.p_value, t.p_value, 1e-12);
    }
}

TEST(Ols, RecoversCoefficientsAndDetectsRankDeficiency) {
    // y = 1 + 2 x exactly.
    const std::vector<double> design{1, 0, 1, 1, 1, 2, 1, 3};
    const std::vector<double> y{1, 3, 5, 7};
    const auto beta = ols(design, 2, y);
    EXPECT_NEAR(beta[0], 1.0, 1e-12);
    EXPECT_NEAR(beta[1], 2.0, 1e-12);
    const std::vector<double> collinear{1, 2, 1, 2, 1, 2};
    EXPECT_THROW(ols(collinear, 2, std::vector<double>{1, 2, 3}), RankDeficientError);
}

namespace {

struct Synthetic {
    std::vector<int> seasons;
    std::vector<double> m, y;
};

Synthetic planted(Rng& rng, int n, double a, double b) {
    Synthetic s;
    for (int i = 0; i < n; ++i) {
        const int season = 1 + i % 4;
        const double m = a * (season > 1) + rng.normal();
        s.seasons.push_back(season);
        s.m.push_back(m);
        s.y.push_back(b * m + rng.normal());
    }
    return s;
}

}  // namespace

TEST(Mediation, RecoversPlantedPaths) {
    Rng rng(9);
    const Synthetic s = planted(rng, 400, -2.0, 10.0);
    const MediationResult r = bootstrap_mediation(s.seasons, s.m, s.y, 500, 1);
    EXPECT_EQ(r.levels, (std::vector<int>{1, 2, 3, 4}));
    ASSERT_EQ(r.a_paths.size(), 3u);
    for (double a : r.a_paths) EXPECT_NEAR(a, -2.0, 0.4);
    EXPECT_NEAR(r.b_path, 10.0, 0.2);
    EXPECT_NEAR(r.indirect_ab, -20.0, 3.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(r.per_level_ab[j], r.a_paths[j] * r.b_path);
    EXPECT_LE(r.ci_low, r.indirect_ab);
    EXPECT_GE(r.ci_high, r.indirect_ab);
    EXPECT_EQ(r.interval, "percentile");
    EXPECT_EQ(r.n_bootstrap, 500);
}

TEST(Mediation, NullBPathStraddlesZero) {
    Rng rng(10);
    Synthetic s = planted(rng, 200, -2.0, 0.0);
    const MediationResult r = bootstrap_mediation(s.seasons, s.m, s.y, 1000, 2);
    EXPECT_NEAR(r.indirect_ab, 0.0, 0.5);
    EXPECT_LT(r.ci_low, 0.0);
    EXPECT_GT(r.ci_high, 0.0);
}

TEST(Mediation, DeterministicAndParallelMatchesSerial) {
    Rng rng(11);
    const Synthetic s = planted(rng, 80, -2.0, 10.0);
    const MediationResult p = bootstrap_mediation(s.seasons, s.m, s.y, 300, 5);
    const MediationResult q = bootstrap_mediation_serial(s.seasons, s.m, s.y, 300, 5);
    const MediationResult again = bootstrap_mediation(s.seasons, s.m, s.y, 300, 5);
    EXPECT_EQ(p.ci_low, q.ci_low);
    EXPECT_EQ(p.ci_high, q.ci_high);
    EXPECT_EQ(p.indirect_ab, q.indirect_ab);
    EXPECT_EQ(p.ci_low, again.ci_low);
    EXPECT_EQ(p.n_skipped, q.n_skipped);
}

TEST(Mediation, RejectsDegenerateInput) {
    const std::vector<int> one_level{1, 1, 1, 1};
    const std::vector<double> v{1, 2, 3, 4};
    EXPECT_ANY_THROW(bootstrap_mediation(one_level, v, v, 10, 1));
    // Mediator constant: b is not identifiable.
    const std::vector<int> seasons{1, 2, 1, 2, 1, 2};
    const std::vector<double> flat(6, 1.0), y{1, 2, 3, 4, 5, 6};
    EXPECT_THROW(bootstrap_mediation(seasons, flat, y, 10, 1), RankDeficientError);
}
