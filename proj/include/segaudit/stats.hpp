#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace segaudit {

enum class IntervalMethod { BootstrapPercentile, ClopperPearson };

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    IntervalMethod method = IntervalMethod::BootstrapPercentile;
};

enum class TestKind { WilcoxonSignedRank, McNemar };
enum class MethodNote { ExactEnumeration, NormalApprox, ExactBinomial, ChiSquareCC };

std::string_view to_string(IntervalMethod m);
std::string_view to_string(TestKind t);
std::string_view to_string(MethodNote m);

/// Paired-test outcome. For Wilcoxon, `statistic` is W+ and `effect_r` the
/// matched-pairs rank-biserial correlation. For McNemar, `discordant_b` counts
/// clean-pass/perturbed-fail pairs, `discordant_c` the reverse, and `statistic`
/// is the continuity-corrected chi-square value (0 when the exact path ran).
struct StatTestResult {
    std::string condition_id;
    TestKind test = TestKind::WilcoxonSignedRank;
    double statistic = 0.0;
    std::size_t n_effective = 0;
    std::size_t discordant_b = 0;
    std::size_t discordant_c = 0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    double effect_r = 0.0;
    MethodNote method = MethodNote::ExactEnumeration;
};

inline constexpr std::size_t kDefaultExactCutoff = 25;

/// Percentile bootstrap CI of the mean. Deterministic given `seed`.
ConfidenceInterval bootstrap_ci(std::span<const double> values, std::size_t iterations = 10000,
                                double level = 0.95, std::uint64_t seed = 0);

/// Signed ranks of the nonzero entries of `deltas` (zeros dropped, mid-ranks for ties).
struct SignedRanks {
    std::vector<double> ranks;      // rank of |d|, per nonzero entry
    std::vector<bool> positive;     // sign of that entry
    double t_plus = 0.0;
    double t_minus = 0.0;
    bool has_ties = false;
    double tie_correction = 0.0;    // sum over tie groups of (t^3 - t)
};
SignedRanks signed_ranks(std::span<const double> deltas);

/// Two-sided Wilcoxon signed-rank test of median zero. Exact null distribution
/// when n_effective <= exact_cutoff and ranks are untied; otherwise the normal
/// approximation with tie-corrected variance and 0.5 continuity correction.
StatTestResult wilcoxon_signed_rank(std::span<const double> deltas,
                                    std::size_t exact_cutoff = kDefaultExactCutoff);

/// (T+ - T-) / (T+ + T-); 0 when every delta is zero.
double rank_biserial(std::span<const double> deltas);

/// McNemar test on paired failure flags.
StatTestResult mcnemar(const std::vector<bool>& clean_fail, const std::vector<bool>& pert_fail,
                       std::size_t exact_cutoff = kDefaultExactCutoff);
/// McNemar from discordant counts alone.
StatTestResult mcnemar_counts(std::size_t b, std::size_t c,
                              std::size_t exact_cutoff = kDefaultExactCutoff);

/// Benjamini-Hochberg adjusted p-values, in the input order.
std::vector<double> bh_fdr(std::span<const double> p_raw);

/// Exact binomial (Clopper-Pearson) interval for x successes in n trials.
ConfidenceInterval clopper_pearson(std::size_t x, std::size_t n, double level = 0.95);

// Special functions backing the tests above.

/// Standard normal upper tail, 1 - Phi(z).
double normal_sf(double z);
/// Upper tail of chi-square with one degree of freedom.
double chi_square1_sf(double x);
/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
/// Inverse of incomplete_beta in x, by bisection.
double beta_quantile(double p, double a, double b);
/// P(X <= k) for X ~ Binomial(n, 1/2), summed exactly in units of 2^-n.
double binomial_half_cdf(std::size_t k, std::size_t n);

}  // namespace segaudit
