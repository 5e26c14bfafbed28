#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segaudit/raster.hpp"

namespace segaudit {

inline constexpr double kDefaultFailureThreshold = 0.5;

/// 2|X ∩ Y| / (|X| + |Y|); 1.0 when both masks are empty.
double dice(const MaskSlice& x, const MaskSlice& y);
/// |X ∩ Y| / |X ∪ Y|; 1.0 when the union is empty.
double iou(const MaskSlice& x, const MaskSlice& y);

struct OverlapCounts {
    std::size_t intersection = 0;
    std::size_t x_count = 0;
    std::size_t y_count = 0;
};
OverlapCounts overlap_counts(const MaskSlice& x, const MaskSlice& y);

/// Outcome of one (slice, condition) prediction.
struct SliceRecord {
    std::string slice_id;
    std::string condition_id;
    double dice = 0.0;
    double iou = 0.0;
    bool failure = false;
    std::optional<double> delta_dice;  // empty for the clean condition

    friend bool operator==(const SliceRecord&, const SliceRecord&) = default;
};

SliceRecord make_record(std::string slice_id, std::string condition_id, const MaskSlice& prediction,
                        const MaskSlice& truth, double failure_threshold = kDefaultFailureThreshold);

/// Fills delta_dice = dice_perturbed - dice_clean, matched by slice_id. The two
/// sets must cover the same slice population. Output keeps the perturbed order.
std::vector<SliceRecord> pair_delta(std::vector<SliceRecord> perturbed,
                                    const std::vector<SliceRecord>& clean);

/// Quantile by linear interpolation between order statistics at index (n - 1) * p.
/// `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

double mean(std::span<const double> values);

struct ConditionSummary {
    std::string condition_id;
    std::size_t n = 0;
    double mean_dice = 0.0;
    double median_dice = 0.0;
    double q1_dice = 0.0;
    double q3_dice = 0.0;
    double mean_iou = 0.0;
    std::optional<double> mean_delta_dice;
    std::size_t failure_count = 0;
    double failure_rate = 0.0;
};

/// Summary of one condition's records. failure_rate counts dice < threshold.
ConditionSummary summarize(std::span<const SliceRecord> records,
                           double failure_threshold = kDefaultFailureThreshold);

struct ReliabilityProfile {
    std::vector<double> thresholds;
    std::vector<double> fraction_at_or_above;
};

/// Fraction of scores with dice >= t for each ascending threshold t.
ReliabilityProfile reliability_cdf(std::span<const double> dice_values,
                                   std::span<const double> thresholds);

}  // namespace segaudit
