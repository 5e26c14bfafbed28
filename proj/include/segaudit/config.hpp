#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "segaudit/perturb.hpp"
#include "segaudit/phantom.hpp"
#include "segaudit/predictor.hpp"
#include "segaudit/preprocess.hpp"

namespace segaudit {

/// Parameters the statistics depend on. Everything in summary.json is a pure
/// function of the slice records and these values.
struct StatsParams {
    std::uint64_t run_seed = 0;
    double failure_threshold = 0.5;
    std::size_t bootstrap_iterations = 10000;
    double confidence_level = 0.95;
    double alpha = 0.05;
    std::size_t exact_test_cutoff = 25;
};

struct AuditConfig {
    std::optional<std::filesystem::path> images_dir;
    std::optional<std::filesystem::path> labels_dir;
    std::optional<PhantomSpec> phantom;

    WindowSpec window;
    int box_padding = 0;
    std::vector<PerturbationCondition> conditions = default_conditions();
    PerturbOptions perturb;
    PredictorSpec predictor = BuiltinSpec{};
    StatsParams stats;
    std::filesystem::path output_dir = "audit_out";
    int workers = 1;
    /// Fraction of requests allowed to fail (recorded as dice 0) before the run aborts.
    double error_budget = 0.001;
};

/// Throws ParameterError on a config that cannot run: no dataset, missing or
/// duplicate clean condition, duplicate ids, bad predictor spec.
void validate(const AuditConfig& config);

/// Parses the JSON config document. Relative paths resolve against `base_dir`.
AuditConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
AuditConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form (echoed into the manifest; round-trips through config_from_json).
nlohmann::json config_to_json(const AuditConfig& config);

nlohmann::json phantom_to_json(const PhantomSpec& spec);
PhantomSpec phantom_from_json(const nlohmann::json& doc);

nlohmann::json stats_params_to_json(const StatsParams& params);
StatsParams stats_params_from_json(const nlohmann::json& doc);

}  // namespace segaudit
