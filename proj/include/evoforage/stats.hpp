#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evoforage {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::optional<double> effect_size;
};

struct SampleGroup {
    std::string label;
    std::vector<double> values;
};

/// Raised when a statistic is undefined for the input (e.g. zero variance).
class StatsError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Average ranks (1-based); ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Sum over tie groups of (t^3 - t).
double tie_term(std::span<const double> values);

/// Type-7 (linear interpolation) sample quantile of already sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

double median(std::vector<double> values);

/// H with tie correction, chi-squared p on k-1 df, eta^2 = (H-k+1)/(n-k)
/// clamped to [0, 1].
TestResult kruskal_wallis(std::span<const SampleGroup> groups);

struct DunnResult {
    std::vector<std::string> labels;
    /// k x k, row-major; z[i][j] = (mean rank i - mean rank j) / se.
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> p_raw;
    std::vector<std::vector<double>> p_adjusted;  // Bonferroni, capped at 1
};

DunnResult dunn_posthoc(std::span<const SampleGroup> groups);

/// Spearman rho; exact permutation p for n <= 8, t approximation above.
/// Throws StatsError when either ranked sequence has zero variance.
TestResult spearman(std::span<const double> x, std::span<const double> y);

enum class Alternative { two_sided, less, greater };

/// U of the first sample: #{a_i > b_j} + 0.5 #{a_i == b_j}. `less` tests
/// whether `a` tends to be smaller than `b`. Exact enumeration over all
/// group assignments when |a| + |b| <= 16, else tie-corrected normal
/// approximation with continuity correction.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          Alternative alternative = Alternative::two_sided);

inline constexpr std::size_t kExactMannWhitneyLimit = 16;
inline constexpr std::size_t kExactSpearmanLimit = 8;

class RankDeficientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Least squares coefficients of y on the columns of a row-major design
/// matrix with `cols` columns. Throws RankDeficientError.
std::vector<double> ols(std::span<const double> design, std::size_t cols, std::span<const double> y);

struct MediationResult {
    std::vector<int> levels;            // sorted; levels[0] is the baseline
    std::vector<double> a_paths;        // one per non-baseline level
    double b_path = 0.0;
    std::vector<double> per_level_ab;   // a_j * b
    double indirect_ab = 0.0;           // mean(a_j) * b
    double ci_low = 0.0;
    double ci_high = 0.0;
    int n_bootstrap = 0;
    int n_skipped = 0;                  // rank-deficient resamples
    std::string interval = "percentile";
};

/// Mediator ~ season dummies (a paths); outcome ~ mediator + season dummies
/// (b path). Percentile CI (95%) from case-resampled replicates; replicate r
/// draws from a stream derived from (seed, r), so the result does not depend
/// on scheduling. Replicates run in parallel (OpenMP).
MediationResult bootstrap_mediation(std::span<const int> seasons, std::span<const double> mediator,
                                    std::span<const double> outcome, int n_boot, std::uint64_t seed);
/// Single-threaded reference; bit-identical to bootstrap_mediation.
MediationResult bootstrap_mediation_serial(std::span<const int> seasons, std::span<const double> mediator,
                                           std::span<const double> outcome, int n_boot, std::uint64_t seed);

}  // namespace evoforage
