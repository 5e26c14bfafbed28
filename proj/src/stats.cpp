#include "segaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "segaudit/error.hpp"
#include "segaudit/metrics.hpp"
#include "segaudit/rng.hpp"

namespace segaudit {
namespace {

// Smallest reported p-value; keeps every p strictly inside (0, 1] when a
// normal tail underflows.
constexpr double kMinP = std::numeric_limits<double>::min();

double clamp_p(double p) { return std::clamp(p, kMinP, 1.0); }

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 20000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

std::string_view to_string(IntervalMethod m) {
    return m == IntervalMethod::BootstrapPercentile ? "BootstrapPercentile" : "ClopperPearson";
}

std::string_view to_string(TestKind t) {
    return t == TestKind::WilcoxonSignedRank ? "WilcoxonSignedRank" : "McNemar";
}

std::string_view to_string(MethodNote m) {
    switch (m) {
        case MethodNote::ExactEnumeration: return "ExactEnumeration";
        case MethodNote::NormalApprox: return "NormalApprox";
        case MethodNote::ExactBinomial: return "ExactBinomial";
        case MethodNote::ChiSquareCC: return "ChiSquareCC";
    }
    return "?";
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double chi_square1_sf(double x) {
    if (x <= 0) return 1.0;
    return std::erfc(std::sqrt(x / 2.0));
}

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) throw ParameterError("incomplete beta requires a, b > 0");
    if (x <= 0) return 0.0;
    if (x >= 1) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                             b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double beta_quantile(double p, double a, double b) {
    if (!(p >= 0 && p <= 1)) throw ParameterError("beta quantile probability outside [0, 1]");
    if (p == 0) return 0.0;
    if (p == 1) return 1.0;
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (incomplete_beta(a, b, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double binomial_half_cdf(std::size_t k, std::size_t n) {
    if (k >= n) return 1.0;
    if (n <= 62) {
        std::uint64_t coef = 1;  // C(n, i)
        std::uint64_t sum = 0;
        for (std::size_t i = 0; i <= k; ++i) {
            sum += coef;
            coef = coef * (n - i) / (i + 1);  // C(62, i) * (62 - i) < 2^64
        }
        return std::ldexp(static_cast<double>(sum), -static_cast<int>(n));
    }
    const double log_half_n = -static_cast<double>(n) * std::numbers::ln2;
    const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
    double sum = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
        const double log_term = lg_n1 - std::lgamma(static_cast<double>(i) + 1.0) -
                                std::lgamma(static_cast<double>(n - i) + 1.0) + log_half_n;
        sum += std::exp(log_term);
    }
    return std::min(sum, 1.0);
}

ConfidenceInterval bootstrap_ci(std::span<const double> values, std::size_t iterations, double level,
                                std::uint64_t seed) {
    if (values.empty()) throw ParameterError("bootstrap of an empty sample");
    if (iterations == 0) throw ParameterError("bootstrap needs at least one iteration");
    if (!(level > 0 && level < 1)) throw ParameterError("confidence level must lie in (0, 1)");

    const auto n = values.size();
    RandomStream stream(seed);
    std::vector<double> means(iterations);
    for (auto& m : means) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += values[stream.index(n)];
        m = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
    const double tail = (1.0 - level) / 2.0;

    ConfidenceInterval ci;
    ci.level = level;
    ci.method = IntervalMethod::BootstrapPercentile;
    // Clamping only removes summation rounding: a resampled mean lies in [min, max].
    ci.lower = std::clamp(quantile_sorted(means, tail), *min_it, *max_it);
    ci.upper = std::clamp(quantile_sorted(means, 1.0 - tail), *min_it, *max_it);
    return ci;
}

SignedRanks signed_ranks(std::span<const double> deltas) {
    struct Entry {
        double magnitude;
        bool positive;
    };
    std::vector<Entry> entries;
    for (double d : deltas) {
        if (d != 0.0) entries.push_back({std::fabs(d), d > 0});
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.magnitude < b.magnitude; });

    SignedRanks out;
    out.ranks.resize(entries.size());
    out.positive.resize(entries.size());
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i;
        while (j + 1 < entries.size() && entries[j + 1].magnitude == entries[i].magnitude) ++j;
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        const auto group = static_cast<double>(j - i + 1);
        if (j > i) {
            out.has_ties = true;
            out.tie_correction += group * group * group - group;
        }
        for (std::size_t k = i; k <= j; ++k) {
            out.ranks[k] = mid_rank;
            out.positive[k] = entries[k].positive;
            (entries[k].positive ? out.t_plus : out.t_minus) += mid_rank;
        }
        i = j + 1;
    }
    return out;
}

double rank_biserial(std::span<const double> deltas) {
    const SignedRanks sr = signed_ranks(deltas);
    const double total = sr.t_plus + sr.t_minus;
    if (total == 0.0) return 0.0;
    return (sr.t_plus - sr.t_minus) / total;
}

StatTestResult wilcoxon_signed_rank(std::span<const double> deltas, std::size_t exact_cutoff) {
    if (exact_cutoff > 60) throw ParameterError("exact Wilcoxon cutoff above 60 is not supported");
    const SignedRanks sr = signed_ranks(deltas);
    StatTestResult res;
    res.test = TestKind::WilcoxonSignedRank;
    res.n_effective = sr.ranks.size();
    res.statistic = sr.t_plus;
    const double total = sr.t_plus + sr.t_minus;
    res.effect_r = total == 0.0 ? 0.0 : (sr.t_plus - sr.t_minus) / total;

    const std::size_t n = res.n_effective;
    if (n == 0) {
        res.method = MethodNote::ExactEnumeration;
        res.statistic = 0.0;
        res.p_raw = res.p_adjusted = 1.0;
        return res;
    }

    if (n <= exact_cutoff && !sr.has_ties) {
        // Ranks are exactly 1..n: count sign assignments per value of W+ by subset-sum.
        const std::size_t max_sum = n * (n + 1) / 2;
        std::vector<std::uint64_t> counts(max_sum + 1, 0);
        counts[0] = 1;
        for (std::size_t r = 1; r <= n; ++r) {
            for (std::size_t s = max_sum; s >= r; --s) counts[s] += counts[s - r];
        }
        const auto w = static_cast<std::size_t>(std::llround(sr.t_plus));
        std::uint64_t at_or_below = 0;
        std::uint64_t at_or_above = 0;
        for (std::size_t s = 0; s <= max_sum; ++s) {
            if (s <= w) at_or_below += counts[s];
            if (s >= w) at_or_above += counts[s];
        }
        const double tail = std::ldexp(static_cast<double>(std::min(at_or_below, at_or_above)), -static_cast<int>(n));
        res.method = MethodNote::ExactEnumeration;
        res.p_raw = clamp_p(2.0 * tail);
    } else {
        const auto nd = static_cast<double>(n);
        const double mu = nd * (nd + 1.0) / 4.0;
        const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - sr.tie_correction / 48.0;
        const double z = std::max(0.0, std::fabs(sr.t_plus - mu) - 0.5) / std::sqrt(var);
        res.method = MethodNote::NormalApprox;
        res.p_raw = clamp_p(2.0 * normal_sf(z));
    }
    res.p_adjusted = res.p_raw;
    return res;
}

StatTestResult mcnemar_counts(std::size_t b, std::size_t c, std::size_t exact_cutoff) {
    StatTestResult res;
    res.test = TestKind::McNemar;
    res.discordant_b = b;
    res.discordant_c = c;
    res.n_effective = b + c;
    res.effect_r = 0.0;
    const std::size_t n = b + c;
    if (n == 0) {
        res.method = MethodNote::ExactBinomial;
        res.p_raw = 1.0;
    } else if (n <= exact_cutoff) {
        res.method = MethodNote::ExactBinomial;
        res.p_raw = clamp_p(2.0 * binomial_half_cdf(std::min(b, c), n));
    } else {
        const double diff = std::fabs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
        res.statistic = diff * diff / static_cast<double>(n);
        res.method = MethodNote::ChiSquareCC;
        res.p_raw = clamp_p(chi_square1_sf(res.statistic));
    }
    res.p_adjusted = res.p_raw;
    return res;
}

StatTestResult mcnemar(const std::vector<bool>& clean_fail, const std::vector<bool>& pert_fail,
                       std::size_t exact_cutoff) {
    if (clean_fail.size() != pert_fail.size()) throw DimensionError("McNemar inputs differ in length");
    std::size_t b = 0;
    std::size_t c = 0;
    for (std::size_t i = 0; i < clean_fail.size(); ++i) {
        b += !clean_fail[i] && pert_fail[i];
        c += clean_fail[i] && !pert_fail[i];
    }
    return mcnemar_counts(b, c, exact_cutoff);
}

std::vector<double> bh_fdr(std::span<const double> p_raw) {
    const std::size_t m = p_raw.size();
    for (double p : p_raw) {
        if (!(p > 0 && p <= 1)) throw ParameterError("p-value outside (0, 1]");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_raw[a] < p_raw[b]; });

    std::vector<double> adjusted(m);
    double running = 1.0;
    for (std::size_t rank = m; rank >= 1; --rank) {
        const std::size_t idx = order[rank - 1];
        running = std::min(running, p_raw[idx] * static_cast<double>(m) / static_cast<double>(rank));
        // p * m / rank can round one ulp below p when rank == m.
        adjusted[idx] = std::max(std::min(running, 1.0), p_raw[idx]);
    }
    return adjusted;
}

ConfidenceInterval clopper_pearson(std::size_t x, std::size_t n, double level) {
    if (n == 0 || x > n) throw ParameterError("clopper_pearson requires 0 <= x <= n and n >= 1");
    if (!(level > 0 && level < 1)) throw ParameterError("confidence level must lie in (0, 1)");
    const double alpha = 1.0 - level;
    const auto xd = static_cast<double>(x);
    const auto nd = static_cast<double>(n);
    ConfidenceInterval ci;
    ci.level = level;
    ci.method = IntervalMethod::ClopperPearson;
    ci.lower = x == 0 ? 0.0 : beta_quantile(alpha / 2.0, xd, nd - xd + 1.0);
    ci.upper = x == n ? 1.0 : beta_quantile(1.0 - alpha / 2.0, xd + 1.0, nd - xd);
    return ci;
}

}  // namespace segaudit
