#include "segaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace segaudit {

OverlapCounts overlap_counts(const MaskSlice& x, const MaskSlice& y) {
    require_same_shape(x, y, "overlap");
    OverlapCounts c;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool a = x.pixels[i] != 0;
        const bool b = y.pixels[i] != 0;
        c.x_count += a;
        c.y_count += b;
        c.intersection += (a && b);
    }
    return c;
}

double dice(const MaskSlice& x, const MaskSlice& y) {
    const auto c = overlap_counts(x, y);
    const std::size_t denom = c.x_count + c.y_count;
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(c.intersection) / static_cast<double>(denom);
}

double iou(const MaskSlice& x, const MaskSlice& y) {
    const auto c = overlap_counts(x, y);
    const std::size_t uni = c.x_count + c.y_count - c.intersection;
    if (uni == 0) return 1.0;
    return static_cast<double>(c.intersection) / static_cast<double>(uni);
}

SliceRecord make_record(std::string slice_id, std::string condition_id, const MaskSlice& prediction,
                        const MaskSlice& truth, double failure_threshold) {
    SliceRecord r;
    r.slice_id = std::move(slice_id);
    r.condition_id = std::move(condition_id);
    r.dice = dice(prediction, truth);
    r.iou = iou(prediction, truth);
    r.failure = r.dice < failure_threshold;
    return r;
}

std::vector<SliceRecord> pair_delta(std::vector<SliceRecord> perturbed, const std::vector<SliceRecord>& clean) {
    std::unordered_map<std::string_view, double> clean_dice;
    clean_dice.reserve(clean.size());
    for (const auto& r : clean) {
        if (!clean_dice.emplace(r.slice_id, r.dice).second)
            throw PairingError("duplicate clean record for " + r.slice_id);
    }
    if (perturbed.size() != clean.size())
        throw PairingError("perturbed and clean record sets cover different slice populations");
    for (auto& r : perturbed) {
        const auto it = clean_dice.find(r.slice_id);
        if (it == clean_dice.end()) throw PairingError("no clean counterpart for " + r.slice_id);
        r.delta_dice = r.dice - it->second;
    }
    return perturbed;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ParameterError("quantile of an empty sample");
    const double pos = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double mean(std::span<const double> values) {
    if (values.empty()) throw ParameterError("mean of an empty sample");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

ConditionSummary summarize(std::span<const SliceRecord> records, double failure_threshold) {
    if (records.empty()) throw ParameterError("cannot summarize an empty record set");

    // Sorting by slice id first makes the floating-point sums independent of input order.
    std::vector<const SliceRecord*> ordered;
    ordered.reserve(records.size());
    for (const auto& r : records) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->slice_id < b->slice_id; });

    ConditionSummary s;
    s.condition_id = records.front().condition_id;
    s.n = records.size();

    std::vector<double> d, j, delta;
    d.reserve(s.n);
    j.reserve(s.n);
    for (const auto* r : ordered) {
        d.push_back(r->dice);
        j.push_back(r->iou);
        if (r->delta_dice) delta.push_back(*r->delta_dice);
        s.failure_count += r->dice < failure_threshold;
    }
    s.mean_dice = mean(d);
    s.mean_iou = mean(j);
    if (!delta.empty()) s.mean_delta_dice = mean(delta);
    std::sort(d.begin(), d.end());
    s.median_dice = quantile_sorted(d, 0.5);
    s.q1_dice = quantile_sorted(d, 0.25);
    s.q3_dice = quantile_sorted(d, 0.75);
    s.failure_rate = static_cast<double>(s.failure_count) / static_cast<double>(s.n);
    return s;
}

ReliabilityProfile reliability_cdf(std::span<const double> dice_values, std::span<const double> thresholds) {
    if (dice_values.empty()) throw ParameterError("reliability profile of an empty sample");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw ParameterError("reliability thresholds must be ascending");
    std::vector<double> sorted(dice_values.begin(), dice_values.end());
    std::sort(sorted.begin(), sorted.end());

    ReliabilityProfile p;
    p.thresholds.assign(thresholds.begin(), thresholds.end());
    for (double t : thresholds) {
        const auto first_at_or_above = std::lower_bound(sorted.begin(), sorted.end(), t);
        const auto count = static_cast<double>(sorted.end() - first_at_or_above);
        p.fraction_at_or_above.push_back(count / static_cast<double>(sorted.size()));
    }
    return p;
}

}  // namespace segaudit
