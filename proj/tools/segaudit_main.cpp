// segaudit: robustness audit of binary segmentation predictors.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "segaudit/config.hpp"
#include "segaudit/harness.hpp"
#include "segaudit/phantom.hpp"
#include "segaudit/protocol_check.hpp"
#include "segaudit/volume_io.hpp"

namespace fs = std::filesystem;
using namespace segaudit;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void require_file(const fs::path& path, const char* what) {
    if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path.string());
}

int cmd_audit(const fs::path& config_path, std::optional<int> workers, std::optional<fs::path> out) {
    require_file(config_path, "config");
    AuditConfig config;
    try {
        config = load_config(config_path);
        if (workers) config.workers = *workers;
        if (out) config.output_dir = *out;
        validate(config);
    } catch (const ParameterError& e) {
        throw UsageError(e.what());
    }
    const AuditRun run = run_audit(config);
    emit_report(run.result, run.manifest, config.output_dir);

    const auto& b = run.result.baseline;
    std::cout << "audited " << run.manifest.slice_count << " slices x " << run.result.conditions.size()
              << " conditions with " << run.manifest.predictor_name << "\n"
              << "clean mean Dice " << format_fixed(b.dice.mean_dice, 4) << " [" << format_fixed(b.mean_dice_ci.lower, 4)
              << ", " << format_fixed(b.mean_dice_ci.upper, 4) << "], failures " << b.dice.failure_count << "/"
              << b.dice.n << "\n"
              << "reports written to " << config.output_dir.string() << "\n";
    if (!run.manifest.predictor_failures.empty())
        std::cout << run.manifest.predictor_failures.size() << " predictor failures recorded as Dice 0\n";
    return 0;
}

int cmd_phantom(const fs::path& spec_path, const fs::path& out_dir, bool gzip) {
    require_file(spec_path, "phantom spec");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(slurp(spec_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(std::string("phantom spec is not valid JSON: ") + e.what());
    }
    std::vector<PhantomSpec> specs;
    try {
        if (doc.is_array()) {
            for (const auto& d : doc) specs.push_back(phantom_from_json(d));
        } else {
            specs.push_back(phantom_from_json(doc));
        }
    } catch (const ParameterError& e) {
        throw UsageError(e.what());
    }
    fs::create_directories(out_dir / "imagesTr");
    fs::create_directories(out_dir / "labelsTr");
    const std::string ext = gzip ? ".nii.gz" : ".nii";
    for (const auto& spec : specs) {
        const auto [image, mask] = generate_phantom(spec);
        write_nifti_volume(out_dir / "imagesTr" / (spec.case_id + ext), image, NiftiDatatype::Float32);
        write_nifti_mask(out_dir / "labelsTr" / (spec.case_id + ext), mask);
        std::cout << spec.case_id << ": " << extract_nonempty_slices(image, mask).size() << " non-empty slices\n";
    }
    return 0;
}

int cmd_stats(const fs::path& records_path, std::optional<fs::path> manifest_path, std::optional<fs::path> out,
              std::optional<fs::path> verify) {
    require_file(records_path, "records file");
    const fs::path dir = records_path.has_parent_path() ? records_path.parent_path() : fs::path(".");
    if (!manifest_path && fs::exists(dir / "manifest.json")) manifest_path = dir / "manifest.json";
    if (!verify && fs::exists(dir / "summary.json")) verify = dir / "summary.json";

    auto records = read_records_csv(records_path);
    // Without a manifest, conditions come from the record ids and parameters from defaults.
    StatsParams params;
    std::vector<PerturbationCondition> conditions;
    if (manifest_path) {
        require_file(*manifest_path, "manifest");
        const AuditConfig config = config_from_json(nlohmann::json::parse(slurp(*manifest_path)).at("config"));
        params = config.stats;
        conditions = config.conditions;
    } else {
        conditions = conditions_from_records(records);
    }
    const AuditResult result = compute_statistics(std::move(records), conditions, params);
    const fs::path out_dir = out.value_or(dir / "recomputed");
    emit_statistics(result, out_dir);
    std::cout << "statistics for " << result.baseline.dice.n << " slices written to " << out_dir.string() << "\n";

    if (verify) {
        if (slurp(*verify) != summary_json_text(result)) {
            std::cerr << "error: recomputed summary differs from " << verify->string() << "\n";
            return kRuntimeError;
        }
        std::cout << "summary matches " << verify->string() << "\n";
    }
    return 0;
}

int cmd_protocol_check(const std::string& command, std::optional<fs::path> expected, double timeout_s) {
    if (expected) require_file(*expected, "expected mask");
    ProtocolCheckOptions options;
    options.command = command;
    options.expected_mask = expected;
    options.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000));
    const ProtocolCheckReport report = run_protocol_check(options);
    for (const auto& step : report.steps)
        std::cout << (step.passed ? "PASS " : "FAIL ") << step.name << ": " << step.detail << "\n";
    std::cout << (report.passed() ? "protocol-check passed" : "protocol-check FAILED") << "\n";
    return report.passed() ? 0 : kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robustness audit harness for binary segmentation predictors"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    fs::path config_path;
    std::optional<int> workers;
    std::optional<fs::path> audit_out;
    auto* audit = app.add_subcommand("audit", "Run a full audit from a JSON config");
    audit->add_option("--config", config_path, "Audit config file")->required();
    audit->add_option("--workers", workers, "Override the worker count");
    audit->add_option("--out", audit_out, "Override the output directory");

    fs::path spec_path, phantom_out;
    bool gzip = false;
    auto* phantom = app.add_subcommand("phantom", "Write synthetic NIfTI phantoms (imagesTr/ and labelsTr/)");
    phantom->add_option("--spec", spec_path, "Phantom spec JSON (object or array)")->required();
    phantom->add_option("--out", phantom_out, "Output directory")->required();
    phantom->add_flag("--gzip", gzip, "Write .nii.gz instead of .nii");

    fs::path records_path;
    std::optional<fs::path> manifest_path, stats_out, verify_path;
    auto* stats = app.add_subcommand("stats", "Recompute statistics from slice_records.csv");
    stats->add_option("--records", records_path, "slice_records.csv")->required();
    stats->add_option("--manifest", manifest_path, "manifest.json with the run's statistics parameters");
    stats->add_option("--out", stats_out, "Output directory (default: <records dir>/recomputed)");
    stats->add_option("--verify", verify_path, "summary.json to compare against (default: sibling summary.json)");

    std::string command;
    std::optional<fs::path> expected_mask;
    double timeout_s = 120.0;
    auto* check = app.add_subcommand("protocol-check", "Conformance test for a subprocess predictor");
    check->add_option("--cmd", command, "Predictor command line")->required();
    check->add_option("--expect-mask", expected_mask, "Golden mask the golden request must reproduce");
    check->add_option("--timeout", timeout_s, "Per-message timeout in seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::cout << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n" << app.help();
        return kUsageError;
    }

    try {
        if (*audit) return cmd_audit(config_path, workers, audit_out);
        if (*phantom) return cmd_phantom(spec_path, phantom_out, gzip);
        if (*stats) return cmd_stats(records_path, manifest_path, stats_out, verify_path);
        if (*check) return cmd_protocol_check(command, expected_mask, timeout_s);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}
