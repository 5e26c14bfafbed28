#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "segaudit/config.hpp"
#include "segaudit/metrics.hpp"
#include "segaudit/perturb.hpp"
#include "segaudit/stats.hpp"
#include "segaudit/text.hpp"
#include "segaudit/volume_io.hpp"

namespace segaudit {

inline constexpr const char* kToolVersion = "0.3.0";

struct BaselineSummary {
    ConditionSummary dice;  // the clean condition's summary
    double median_iou = 0.0;
    double q1_iou = 0.0;
    double q3_iou = 0.0;
    ConfidenceInterval mean_dice_ci;
    ConfidenceInterval mean_iou_ci;
    ConfidenceInterval failure_rate_ci;
};

struct WorstSlice {
    std::string slice_id;
    double dice = 0.0;
};

struct AuditResult {
    std::vector<PerturbationCondition> conditions;  // config order, clean included
    std::vector<SliceRecord> records;               // slice-major, conditions in config order
    std::vector<ConditionSummary> summaries;        // config order
    BaselineSummary baseline;
    std::vector<StatTestResult> wilcoxon;           // one per non-clean condition, config order
    std::vector<StatTestResult> mcnemar;
    ReliabilityProfile reliability;                 // over clean dice
    std::vector<WorstSlice> worst_slices;           // every slice, ascending clean dice
    StatsParams params;
};

struct PredictorFailure {
    std::string slice_id;
    std::string condition_id;
    std::string message;
};

struct AuditManifest {
    nlohmann::json config;
    std::string config_hash;
    std::uint64_t run_seed = 0;
    std::size_t slice_count = 0;
    std::size_t case_count = 0;
    std::string predictor_name;
    std::string tool_version = kToolVersion;
    std::string started_at;
    std::string finished_at;
    std::vector<PredictorFailure> predictor_failures;
    std::vector<ShutdownStatus> shutdowns;

    nlohmann::json to_json() const;
};

struct AuditRun {
    AuditResult result;
    AuditManifest manifest;
};

/// Slices of the configured dataset (NIfTI directories or phantom), in case order.
std::vector<SlicePair> load_slices(const AuditConfig& config);

/// Full audit: every slice under every condition, then the statistics.
AuditRun run_audit(const AuditConfig& config);

/// Runs prediction for `slices` without the statistics stage.
std::vector<SliceRecord> evaluate_records(const std::vector<SlicePair>& slices, const AuditConfig& config,
                                          AuditManifest& manifest);

/// Conditions in order of first appearance; ids must be canonical.
std::vector<PerturbationCondition> conditions_from_records(const std::vector<SliceRecord>& records);

/// Summaries, baseline, paired tests with BH-FDR per family, reliability profile
/// and worst-slice ranking. Records must be slice-major with one record per
/// (slice, condition); the clean condition must be present.
AuditResult compute_statistics(std::vector<SliceRecord> records,
                               const std::vector<PerturbationCondition>& conditions,
                               const StatsParams& params);

/// The reliability thresholds written to reliability.tsv: 0.00, 0.01, ..., 1.00.
std::vector<double> reliability_grid();

/// Clean-dice cutoff for the worst-slice listing.
inline constexpr double kWorstSliceCutoff = 0.55;

// Report files. Each `*_text` function produces the exact file contents.

std::string records_csv_text(const std::vector<SliceRecord>& records);
std::vector<SliceRecord> parse_records_csv(const std::string& text);
std::vector<SliceRecord> read_records_csv(const std::filesystem::path& path);
std::string summary_json_text(const AuditResult& result);
std::string table3_markdown(const AuditResult& result);
std::string reliability_tsv_text(const AuditResult& result);
std::string worst_slices_text(const AuditResult& result);

/// Writes slice_records.csv, summary.json, table3.md, reliability.tsv,
/// worst_slices.txt and manifest.json into `output_dir`.
void emit_report(const AuditResult& result, const AuditManifest& manifest,
                 const std::filesystem::path& output_dir);

/// Writes everything except the manifest (used when recomputing from records).
void emit_statistics(const AuditResult& result, const std::filesystem::path& output_dir);


}  // namespace segaudit
