#include "evoforage/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "evoforage/rng.hpp"

namespace evoforage {

namespace {

constexpr double kTieEps = 1e-12;

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

double normal_two_sided(double z) {
    const boost::math::normal_distribution<> nd;
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(nd, std::abs(z))));
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double tie_term(std::span<const double> values) {
    std::map<double, double> counts;
    for (double v : values) counts[v] += 1.0;
    double s = 0.0;
    for (const auto& [_, t] : counts) s += t * t * t - t;
    return s;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, 0.5);
}

namespace {

struct Pooled {
    std::vector<double> values;
    std::vector<double> ranks;
    std::vector<std::size_t> sizes;
    std::vector<double> mean_rank;
    double n = 0.0;
    double ties = 0.0;
};

Pooled pool(std::span<const SampleGroup> groups) {
    Pooled p;
    for (const auto& g : groups) {
        if (g.values.empty()) throw std::invalid_argument("group '" + g.label + "' is empty");
        require_finite(g.values, "group values");
        p.values.insert(p.values.end(), g.values.begin(), g.values.end());
        p.sizes.push_back(g.values.size());
    }
    p.ranks = average_ranks(p.values);
    p.n = static_cast<double>(p.values.size());
    p.ties = tie_term(p.values);
    std::size_t off = 0;
    for (std::size_t s : p.sizes) {
        double sum = 0.0;
        for (std::size_t i = 0; i < s; ++i) sum += p.ranks[off + i];
        p.mean_rank.push_back(sum / static_cast<double>(s));
        off += s;
    }
    return p;
}

}  // namespace

TestResult kruskal_wallis(std::span<const SampleGroup> groups) {
    if (groups.size() < 2) throw std::invalid_argument("kruskal_wallis needs at least two groups");
    const Pooled p = pool(groups);
    const double n = p.n;
    const auto k = static_cast<double>(groups.size());
    const double correction = 1.0 - p.ties / (n * n * n - n);
    TestResult r;
    if (correction <= kTieEps) {
        r.statistic = 0.0;
        r.p_value = 1.0;
        r.effect_size = 0.0;
        return r;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < p.sizes.size(); ++i) {
        const double ri = p.mean_rank[i] * static_cast<double>(p.sizes[i]);
        s += ri * ri / static_cast<double>(p.sizes[i]);
    }
    const double h = (12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0)) / correction;
    r.statistic = std::max(0.0, h);
    const boost::math::chi_squared_distribution<> chi(k - 1.0);
    r.p_value = r.statistic > 0.0 ? boost::math::cdf(boost::math::complement(chi, r.statistic)) : 1.0;
    r.effect_size = n > k ? std::clamp((r.statistic - k + 1.0) / (n - k), 0.0, 1.0) : 0.0;
    return r;
}

DunnResult dunn_posthoc(std::span<const SampleGroup> groups) {
    if (groups.size() < 2) throw std::invalid_argument("dunn_posthoc needs at least two groups");
    const Pooled p = pool(groups);
    const std::size_t k = groups.size();
    const double comparisons = static_cast<double>(k * (k - 1) / 2);
    const double base = p.n * (p.n + 1.0) / 12.0 - p.ties / (12.0 * (p.n - 1.0));

    DunnResult d;
    for (const auto& g : groups) d.labels.push_back(g.label);
    d.z.assign(k, std::vector<double>(k, 0.0));
    d.p_raw.assign(k, std::vector<double>(k, 1.0));
    d.p_adjusted.assign(k, std::vector<double>(k, 1.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double se =
                std::sqrt(base * (1.0 / static_cast<double>(p.sizes[i]) + 1.0 / static_cast<double>(p.sizes[j])));
            const double z = se > kTieEps ? (p.mean_rank[i] - p.mean_rank[j]) / se : 0.0;
            d.z[i][j] = z;
            d.p_raw[i][j] = normal_two_sided(z);
            d.p_adjusted[i][j] = std::min(1.0, d.p_raw[i][j] * comparisons);
        }
    }
    return d;
}

namespace {

double pearson(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw StatsError("spearman: zero variance in ranked data");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

TestResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    if (x.size() < 3) throw std::invalid_argument("spearman: need at least 3 pairs");
    require_finite(x, "spearman x");
    require_finite(y, "spearman y");
    const auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    TestResult r;
    r.statistic = pearson(rx, ry);
    const std::size_t n = x.size();
    if (n <= kExactSpearmanLimit) {
        std::sort(ry.begin(), ry.end());
        std::size_t total = 0, extreme = 0;
        const double obs = std::abs(r.statistic) - 1e-12;
        do {
            ++total;
            if (std::abs(pearson(rx, ry)) >= obs) ++extreme;
        } while (std::next_permutation(ry.begin(), ry.end()));
        // Each distinct arrangement of tied ranks stands for the same number of permutations.
        r.p_value = static_cast<double>(extreme) / static_cast<double>(total);
        return r;
    }
    const double df = static_cast<double>(n) - 2.0;
    if (std::abs(r.statistic) >= 1.0) {
        r.p_value = 0.0;
        return r;
    }
    const double t = r.statistic * std::sqrt(df / (1.0 - r.statistic * r.statistic));
    const boost::math::students_t_distribution<> dist(df);
    r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
    return r;
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, Alternative alternative) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
    require_finite(a, "mann_whitney_u a");
    require_finite(b, "mann_whitney_u b");
    const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    const auto ranks = average_ranks(all);
    const double offset = static_cast<double>(n1) * static_cast<double>(n1 + 1) / 2.0;
    double rsum = 0.0;
    for (std::size_t i = 0; i < n1; ++i) rsum += ranks[i];
    const double u = rsum - offset;
    const double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;

    TestResult r;
    r.statistic = u;
    if (n <= kExactMannWhitneyLimit) {
        std::size_t total = 0, extreme = 0;
        const std::uint32_t limit = 1u << n;
        for (std::uint32_t mask = 0; mask < limit; ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) != n1) continue;
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (mask & (1u << i)) s += ranks[i];
            const double uu = s - offset;
            ++total;
            bool hit = false;
            switch (alternative) {
            case Alternative::two_sided: hit = std::abs(uu - mu) >= std::abs(u - mu) - 1e-9; break;
            case Alternative::less: hit = uu <= u + 1e-9; break;
            case Alternative::greater: hit = uu >= u - 1e-9; break;
            }
            if (hit) ++extreme;
        }
        r.p_value = static_cast<double>(extreme) / static_cast<double>(total);
        return r;
    }

    const double dn = static_cast<double>(n);
    const double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                       ((dn + 1.0) - tie_term(all) / (dn * (dn - 1.0)));
    if (var <= 0.0) {
        r.p_value = 1.0;
        return r;
    }
    const double sd = std::sqrt(var);
    const boost::math::normal_distribution<> nd;
    switch (alternative) {
    case Alternative::two_sided: {
        const double z = std::max(0.0, std::abs(u - mu) - 0.5) / sd;
        r.p_value = normal_two_sided(z);
        break;
    }
    case Alternative::less: r.p_value = boost::math::cdf(nd, (u - mu + 0.5) / sd); break;
    case Alternative::greater: r.p_value = boost::math::cdf(boost::math::complement(nd, (u - mu - 0.5) / sd)); break;
    }
    r.p_value = std::clamp(r.p_value, 0.0, 1.0);
    return r;
}

std::vector<double> ols(std::span<const double> design, std::size_t cols, std::span<const double> y) {
    if (cols == 0 || design.size() != cols * y.size()) throw std::invalid_argument("ols: design shape mismatch");
    const auto rows = static_cast<Eigen::Index>(y.size());
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
        design.data(), rows, static_cast<Eigen::Index>(cols));
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), rows);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < static_cast<Eigen::Index>(cols)) throw RankDeficientError("ols: design matrix is rank deficient");
    const Eigen::VectorXd beta = qr.solve(yv);
    return {beta.data(), beta.data() + beta.size()};
}

namespace {

struct MediationPoint {
    std::vector<double> a;
    double b = 0.0;
};

// `level_index[i]` is the position of row i's season among the sorted levels.
MediationPoint mediation_point(std::span<const std::size_t> rows, std::span<const int> level_index, std::size_t k,
                               std::span<const double> mediator, std::span<const double> outcome) {
    const std::size_t n = rows.size();
    const std::size_t ca = k, cb = k + 1;
    std::vector<double> xa(n * ca, 0.0), xb(n * cb, 0.0), m(n), y(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = rows[r];
        const auto lvl = static_cast<std::size_t>(level_index[i]);
        xa[r * ca] = 1.0;
        xb[r * cb] = 1.0;
        xb[r * cb + 1] = mediator[i];
        if (lvl > 0) {
            xa[r * ca + lvl] = 1.0;
            xb[r * cb + 1 + lvl] = 1.0;
        }
        m[r] = mediator[i];
        y[r] = outcome[i];
    }
    const auto beta_a = ols(xa, ca, m);
    const auto beta_b = ols(xb, cb, y);
    return {std::vector<double>(beta_a.begin() + 1, beta_a.end()), beta_b[1]};
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

struct MediationSetup {
    std::vector<int> levels;
    std::vector<int> level_index;
};

MediationSetup setup_mediation(std::span<const int> seasons, std::span<const double> mediator,
                               std::span<const double> outcome, int n_boot) {
    if (seasons.size() != mediator.size() || seasons.size() != outcome.size())
        throw std::invalid_argument("bootstrap_mediation: column lengths differ");
    if (n_boot < 1) throw std::invalid_argument("bootstrap_mediation: n_boot must be positive");
    require_finite(mediator, "mediator");
    require_finite(outcome, "outcome");
    MediationSetup s;
    s.levels.assign(seasons.begin(), seasons.end());
    std::sort(s.levels.begin(), s.levels.end());
    s.levels.erase(std::unique(s.levels.begin(), s.levels.end()), s.levels.end());
    if (s.levels.size() < 2) throw std::invalid_argument("bootstrap_mediation: need at least two season levels");
    for (int v : seasons)
        s.level_index.push_back(
            static_cast<int>(std::lower_bound(s.levels.begin(), s.levels.end(), v) - s.levels.begin()));
    return s;
}

double replicate_ab(std::size_t r, std::uint64_t seed, std::span<const int> level_index, std::size_t k,
                    std::span<const double> mediator, std::span<const double> outcome,
                    std::vector<std::size_t>& rows) {
    const std::size_t n = level_index.size();
    Rng rng(derive_seed(seed, {tag("bootstrap"), r}));
    rows.resize(n);
    for (auto& i : rows) i = static_cast<std::size_t>(rng.below(n));
    try {
        const auto pt = mediation_point(rows, level_index, k, mediator, outcome);
        return mean_of(pt.a) * pt.b;
    } catch (const RankDeficientError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

MediationResult finish_mediation(const MediationSetup& s, std::span<const double> mediator,
                                 std::span<const double> outcome, const std::vector<double>& reps) {
    const std::size_t n = mediator.size();
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const auto pt = mediation_point(all, s.level_index, s.levels.size(), mediator, outcome);

    MediationResult res;
    res.levels = s.levels;
    res.a_paths = pt.a;
    res.b_path = pt.b;
    for (double a : pt.a) res.per_level_ab.push_back(a * pt.b);
    res.indirect_ab = mean_of(pt.a) * pt.b;
    res.n_bootstrap = static_cast<int>(reps.size());

    std::vector<double> ok;
    ok.reserve(reps.size());
    for (double v : reps)
        if (std::isfinite(v)) ok.push_back(v);
    res.n_skipped = static_cast<int>(reps.size() - ok.size());
    if (ok.empty()) throw RankDeficientError("bootstrap_mediation: every replicate was rank deficient");
    std::sort(ok.begin(), ok.end());
    res.ci_low = quantile_sorted(ok, 0.025);
    res.ci_high = quantile_sorted(ok, 0.975);
    return res;
}

}  // namespace

MediationResult bootstrap_mediation_serial(std::span<const int> seasons, std::span<const double> mediator,
                                           std::span<const double> outcome, int n_boot, std::uint64_t seed) {
    const auto s = setup_mediation(seasons, mediator, outcome, n_boot);
    std::vector<double> reps(static_cast<std::size_t>(n_boot));
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < reps.size(); ++r)
        reps[r] = replicate_ab(r, seed, s.level_index, s.levels.size(), mediator, outcome, rows);
    return finish_mediation(s, mediator, outcome, reps);
}

MediationResult bootstrap_mediation(std::span<const int> seasons, std::span<const double> mediator,
                                    std::span<const double> outcome, int n_boot, std::uint64_t seed) {
    const auto s = setup_mediation(seasons, mediator, outcome, n_boot);
    std::vector<double> reps(static_cast<std::size_t>(n_boot));
#pragma omp parallel
    {
        std::vector<std::size_t> rows;
#pragma omp for schedule(static)
        for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(reps.size()); ++r)
            reps[static_cast<std::size_t>(r)] = replicate_ab(static_cast<std::size_t>(r), seed, s.level_index,
                                                             s.levels.size(), mediator, outcome, rows);
    }
    return finish_mediation(s, mediator, outcome, reps);
}

}  // namespace evoforage
