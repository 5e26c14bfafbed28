#include "segaudit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "segaudit/phantom.hpp"
#include "segaudit/predictor.hpp"
#include "segaudit/preprocess.hpp"
#include "segaudit/rng.hpp"

namespace segaudit {
namespace {

using nlohmann::json;

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json ci_json(const ConfidenceInterval& ci) {
    return {{"lower", ci.lower}, {"upper", ci.upper}, {"level", ci.level}, {"method", to_string(ci.method)}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::uint64_t bootstrap_seed(std::uint64_t run_seed, std::string_view metric) {
    return derive_seed(run_seed, "baseline", metric);
}

struct SliceInput {
    Gray8Slice gray;
    BoxPrompt box;
};

}  // namespace

std::vector<double> reliability_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
    return grid;
}

std::vector<SlicePair> load_slices(const AuditConfig& config) {
    std::vector<SlicePair> slices;
    if (config.phantom) {
        const auto [image, mask] = generate_phantom(*config.phantom);
        slices = extract_nonempty_slices(image, mask);
    } else {
        for (const auto& c : list_cases(*config.images_dir, *config.labels_dir)) {
            const VolumeHU image = read_nifti_volume(c.image);
            const MaskVolume mask = read_nifti_mask(c.label);
            if (image.dims != mask.dims) throw DimensionError("image and label dimensions differ for " + c.case_id);
            auto part = extract_nonempty_slices(image, mask);
            std::move(part.begin(), part.end(), std::back_inserter(slices));
        }
    }
    if (slices.empty()) throw Error("dataset contains no non-empty slices");
    return slices;
}

std::vector<SliceRecord> evaluate_records(const std::vector<SlicePair>& slices, const AuditConfig& config,
                                          AuditManifest& manifest) {
    const auto& conditions = config.conditions;
    const std::size_t n_cond = conditions.size();
    const std::size_t total = slices.size() * n_cond;
    const auto allowed_failures = static_cast<std::size_t>(config.error_budget * static_cast<double>(total));

    const auto clean_it = std::find_if(conditions.begin(), conditions.end(),
                                       [](const auto& c) { return c.kind == PerturbationKind::Clean; });
    if (clean_it == conditions.end()) throw ParameterError("conditions must include the clean condition");
    const auto clean_index = static_cast<std::size_t>(clean_it - conditions.begin());

    const std::size_t n_workers = std::clamp<std::size_t>(static_cast<std::size_t>(config.workers), 1, slices.size());
    std::vector<std::unique_ptr<PredictorSession>> sessions;
    for (std::size_t i = 0; i < n_workers; ++i) sessions.push_back(spawn(config.predictor));
    manifest.predictor_name = sessions.front()->name();

    std::vector<SliceRecord> records(total);
    std::vector<std::optional<PredictorFailure>> failures(total);
    std::atomic<std::size_t> next_slice{0};
    std::atomic<std::size_t> failure_count{0};
    std::atomic<bool> abort{false};
    std::mutex error_mutex;
    std::string fatal;

    auto worker = [&](std::size_t w) {
        auto& session = sessions[w];
        try {
            for (;;) {
                if (abort) return;
                const std::size_t s = next_slice++;
                if (s >= slices.size()) return;
                const SlicePair& slice = slices[s];
                const SliceInput input{window_hu(slice.hu, config.window), bbox_from_mask(slice.gt, config.box_padding)};
                for (std::size_t c = 0; c < n_cond; ++c) {
                    const auto& cond = conditions[c];
                    const std::size_t idx = s * n_cond + c;
                    const SeedDerivation seeds{config.stats.run_seed, slice.slice_id, cond.id};
                    const Gray8Slice perturbed = apply_condition(input.gray, cond, seeds, config.perturb);
                    const PredictRequest request{slice.slice_id + "/" + cond.id, to_rgb(perturbed), input.box};
                    try {
                        if (!session->alive()) session = spawn(config.predictor);
                        const PredictResponse response = session->predict(request, slice.gt);
                        records[idx] = make_record(slice.slice_id, cond.id, response.mask, slice.gt,
                                                   config.stats.failure_threshold);
                    } catch (const Error& e) {
                        records[idx] = SliceRecord{slice.slice_id, cond.id, 0.0, 0.0, true, std::nullopt};
                        failures[idx] = PredictorFailure{slice.slice_id, cond.id, e.what()};
                        if (++failure_count > allowed_failures) {
                            std::lock_guard lock(error_mutex);
                            if (fatal.empty())
                                fatal = "predictor failed on more than " + std::to_string(allowed_failures) + " of " +
                                        std::to_string(total) + " requests; last error: " + e.what();
                            abort = true;
                            return;
                        }
                    }
                }
            }
        } catch (const std::exception& e) {
            std::lock_guard lock(error_mutex);
            if (fatal.empty()) fatal = e.what();
            abort = true;
        }
    };

    if (n_workers == 1) {
        worker(0);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker, w);
        for (auto& t : threads) t.join();
    }
    for (auto& session : sessions) {
        ShutdownStatus st = session->shutdown();
        if (st.forced_kill || st.exit_code != 0 || !st.detail.empty()) manifest.shutdowns.push_back(st);
    }
    for (auto& f : failures) {
        if (f) manifest.predictor_failures.push_back(std::move(*f));
    }
    if (abort) throw PredictorError(fatal);

    // Pair every perturbed record with the slice's clean record.
    for (std::size_t s = 0; s < slices.size(); ++s) {
        const double clean_dice = records[s * n_cond + clean_index].dice;
        for (std::size_t c = 0; c < n_cond; ++c) {
            if (c != clean_index) records[s * n_cond + c].delta_dice = records[s * n_cond + c].dice - clean_dice;
        }
    }
    return records;
}

std::vector<PerturbationCondition> conditions_from_records(const std::vector<SliceRecord>& records) {
    std::vector<PerturbationCondition> out;
    for (const auto& r : records) {
        if (std::none_of(out.begin(), out.end(), [&](const auto& c) { return c.id == r.condition_id; }))
            out.push_back(parse_condition_id(r.condition_id));
    }
    return out;
}

AuditResult compute_statistics(std::vector<SliceRecord> records, const std::vector<PerturbationCondition>& conditions,
                               const StatsParams& params) {
    const std::size_t n_cond = conditions.size();
    if (n_cond == 0 || records.empty()) throw Error("no records to analyse");
    if (records.size() % n_cond != 0) throw PairingError("record count is not a multiple of the condition count");
    const std::size_t n_slices = records.size() / n_cond;

    std::size_t clean_index = n_cond;
    for (std::size_t c = 0; c < n_cond; ++c) {
        if (conditions[c].kind == PerturbationKind::Clean) clean_index = c;
    }
    if (clean_index == n_cond) throw PairingError("records contain no clean condition");

    // Per-condition columns in slice order.
    std::vector<std::vector<SliceRecord>> by_cond(n_cond);
    for (std::size_t s = 0; s < n_slices; ++s) {
        const std::string& slice_id = records[s * n_cond].slice_id;
        for (std::size_t c = 0; c < n_cond; ++c) {
            SliceRecord r = records[s * n_cond + c];
            if (r.slice_id != slice_id || r.condition_id != conditions[c].id)
                throw PairingError("records are not slice-major in condition order at row " +
                                   std::to_string(s * n_cond + c));
            r.failure = r.dice < params.failure_threshold;
            r.delta_dice.reset();
            by_cond[c].push_back(std::move(r));
        }
    }
    for (std::size_t c = 0; c < n_cond; ++c) {
        if (c != clean_index) by_cond[c] = pair_delta(std::move(by_cond[c]), by_cond[clean_index]);
    }

    AuditResult res;
    res.params = params;
    res.conditions = conditions;
    res.records.reserve(records.size());
    for (std::size_t s = 0; s < n_slices; ++s) {
        for (std::size_t c = 0; c < n_cond; ++c) res.records.push_back(by_cond[c][s]);
    }
    for (std::size_t c = 0; c < n_cond; ++c) res.summaries.push_back(summarize(by_cond[c], params.failure_threshold));

    const auto& clean = by_cond[clean_index];
    std::vector<double> clean_dice;
    std::vector<double> clean_iou;
    std::vector<bool> clean_fail;
    for (const auto& r : clean) {
        clean_dice.push_back(r.dice);
        clean_iou.push_back(r.iou);
        clean_fail.push_back(r.failure);
    }

    BaselineSummary& base = res.baseline;
    base.dice = res.summaries[clean_index];
    std::vector<double> sorted_iou = clean_iou;
    std::sort(sorted_iou.begin(), sorted_iou.end());
    base.median_iou = quantile_sorted(sorted_iou, 0.5);
    base.q1_iou = quantile_sorted(sorted_iou, 0.25);
    base.q3_iou = quantile_sorted(sorted_iou, 0.75);
    base.mean_dice_ci = bootstrap_ci(clean_dice, params.bootstrap_iterations, params.confidence_level,
                                     bootstrap_seed(params.run_seed, "bootstrap/dice"));
    base.mean_iou_ci = bootstrap_ci(clean_iou, params.bootstrap_iterations, params.confidence_level,
                                    bootstrap_seed(params.run_seed, "bootstrap/iou"));
    base.failure_rate_ci = clopper_pearson(base.dice.failure_count, base.dice.n, params.confidence_level);

    for (std::size_t c = 0; c < n_cond; ++c) {
        if (c == clean_index) continue;
        std::vector<double> deltas;
        std::vector<bool> fails;
        for (const auto& r : by_cond[c]) {
            deltas.push_back(*r.delta_dice);
            fails.push_back(r.failure);
        }
        StatTestResult w = wilcoxon_signed_rank(deltas, params.exact_test_cutoff);
        w.condition_id = conditions[c].id;
        res.wilcoxon.push_back(w);
        StatTestResult m = mcnemar(clean_fail, fails, params.exact_test_cutoff);
        m.condition_id = conditions[c].id;
        res.mcnemar.push_back(m);
    }
    for (auto* family : {&res.wilcoxon, &res.mcnemar}) {
        std::vector<double> raw;
        for (const auto& t : *family) raw.push_back(t.p_raw);
        const auto adjusted = bh_fdr(raw);
        for (std::size_t i = 0; i < family->size(); ++i) (*family)[i].p_adjusted = adjusted[i];
    }

    res.reliability = reliability_cdf(clean_dice, reliability_grid());

    for (const auto& r : clean) res.worst_slices.push_back({r.slice_id, r.dice});
    std::stable_sort(res.worst_slices.begin(), res.worst_slices.end(),
                     [](const WorstSlice& a, const WorstSlice& b) { return a.dice < b.dice; });
    return res;
}

AuditRun run_audit(const AuditConfig& config) {
    validate(config);
    AuditRun run;
    AuditManifest& m = run.manifest;
    m.started_at = utc_now();
    m.config = config_to_json(config);
    m.config_hash = hex64(fnv1a64(m.config.dump()));
    m.run_seed = config.stats.run_seed;

    const std::vector<SlicePair> slices = load_slices(config);
    m.slice_count = slices.size();
    std::vector<std::string> cases;
    for (const auto& s : slices) {
        if (cases.empty() || cases.back() != s.case_id) cases.push_back(s.case_id);
    }
    m.case_count = cases.size();

    std::vector<SliceRecord> records = evaluate_records(slices, config, m);
    run.result = compute_statistics(std::move(records), config.conditions, config.stats);
    m.finished_at = utc_now();
    return run;
}

nlohmann::json AuditManifest::to_json() const {
    json seeds = json::array();
    if (config.contains("conditions")) {
        for (const auto& c : config["conditions"]) {
            const auto cond = c.value("kind", "") == "clean"
                                  ? clean_condition()
                                  : make_condition(parse_kind(c["kind"].get<std::string>()),
                                                   c["parameter"].get<double>());
            seeds.push_back({{"condition_id", cond.id}, {"fnv1a64", hex64(fnv1a64(cond.id))}});
        }
    }
    json failures = json::array();
    for (const auto& f : predictor_failures)
        failures.push_back({{"slice_id", f.slice_id}, {"condition_id", f.condition_id}, {"message", f.message}});
    json stops = json::array();
    for (const auto& s : shutdowns)
        stops.push_back({{"exit_code", s.exit_code}, {"forced_kill", s.forced_kill}, {"detail", s.detail}});

    return {{"tool", "segaudit"},
            {"tool_version", tool_version},
            {"config", config},
            {"config_hash", config_hash},
            {"run_seed", run_seed},
            {"slice_count", slice_count},
            {"case_count", case_count},
            {"seed_recipe",
             {{"noise_stream_seed", "splitmix64(run_seed ^ fnv1a64(slice_id) ^ fnv1a64(condition_id))"},
              {"noise_generator", "mt19937_64, Box-Muller normals, one draw per pixel in row-major order"},
              {"bootstrap_seed", "splitmix64(run_seed ^ fnv1a64(\"baseline\") ^ fnv1a64(\"bootstrap/<metric>\"))"},
              {"conditions", seeds}}},
            {"predictor", {{"name", predictor_name}, {"spec", config.value("predictor", json::object())}}},
            {"predictor_failures", failures},
            {"predictor_shutdowns", stops},
            {"started_at", started_at},
            {"finished_at", finished_at}};
}

std::string records_csv_text(const std::vector<SliceRecord>& records) {
    std::string out = "slice_id,condition_id,dice,iou,failure,delta_dice\n";
    for (const auto& r : records) {
        out += r.slice_id;
        out += ',';
        out += r.condition_id;
        out += ',';
        out += format_double(r.dice);
        out += ',';
        out += format_double(r.iou);
        out += r.failure ? ",1," : ",0,";
        if (r.delta_dice) out += format_double(*r.delta_dice);
        out += '\n';
    }
    return out;
}

std::vector<SliceRecord> parse_records_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "slice_id,condition_id,dice,iou,failure,delta_dice")
        throw FormatError("slice_records.csv: unexpected header");

    auto parse_number = [](const std::string& field, std::size_t row) {
        double v = 0.0;
        const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
        if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
            throw FormatError("slice_records.csv row " + std::to_string(row) + ": bad number '" + field + "'");
        return v;
    };

    std::vector<SliceRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            f.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (f.size() != 6) throw FormatError("slice_records.csv row " + std::to_string(row) + ": expected 6 fields");
        SliceRecord r;
        r.slice_id = f[0];
        r.condition_id = f[1];
        r.dice = parse_number(f[2], row);
        r.iou = parse_number(f[3], row);
        if (f[4] != "0" && f[4] != "1")
            throw FormatError("slice_records.csv row " + std::to_string(row) + ": failure must be 0 or 1");
        r.failure = f[4] == "1";
        if (!f[5].empty()) r.delta_dice = parse_number(f[5], row);
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<SliceRecord> read_records_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_records_csv(ss.str());
}

std::string summary_json_text(const AuditResult& r) {
    const auto& b = r.baseline;
    json baseline = {{"n", b.dice.n},
                     {"mean_dice", b.dice.mean_dice},
                     {"median_dice", b.dice.median_dice},
                     {"q1_dice", b.dice.q1_dice},
                     {"q3_dice", b.dice.q3_dice},
                     {"mean_dice_ci", ci_json(b.mean_dice_ci)},
                     {"mean_iou", b.dice.mean_iou},
                     {"median_iou", b.median_iou},
                     {"q1_iou", b.q1_iou},
                     {"q3_iou", b.q3_iou},
                     {"mean_iou_ci", ci_json(b.mean_iou_ci)},
                     {"failure_count", b.dice.failure_count},
                     {"failure_rate", b.dice.failure_rate},
                     {"failure_rate_ci", ci_json(b.failure_rate_ci)}};

    json conditions = json::array();
    for (std::size_t i = 0; i < r.conditions.size(); ++i) {
        const auto& c = r.conditions[i];
        const auto& s = r.summaries[i];
        conditions.push_back({{"condition_id", c.id},
                              {"kind", to_string(c.kind)},
                              {"parameter", c.parameter},
                              {"severity", to_string(c.severity)},
                              {"n", s.n},
                              {"mean_dice", s.mean_dice},
                              {"median_dice", s.median_dice},
                              {"q1_dice", s.q1_dice},
                              {"q3_dice", s.q3_dice},
                              {"mean_iou", s.mean_iou},
                              {"mean_delta_dice", s.mean_delta_dice ? json(*s.mean_delta_dice) : json(nullptr)},
                              {"failure_count", s.failure_count},
                              {"failure_rate", s.failure_rate}});
    }

    auto test_json = [&](const StatTestResult& t) {
        json j = {{"condition_id", t.condition_id},
                  {"test", to_string(t.test)},
                  {"statistic", t.statistic},
                  {"n_effective", t.n_effective},
                  {"p_raw", t.p_raw},
                  {"p_adjusted", t.p_adjusted},
                  {"method_note", to_string(t.method)},
                  {"significant", t.p_adjusted < r.params.alpha}};
        if (t.test == TestKind::WilcoxonSignedRank) {
            j["effect_r"] = t.effect_r;
        } else {
            j["discordant_b"] = t.discordant_b;
            j["discordant_c"] = t.discordant_c;
        }
        return j;
    };
    json tests = json::array();
    for (std::size_t i = 0; i < r.wilcoxon.size(); ++i) {
        tests.push_back(test_json(r.wilcoxon[i]));
        tests.push_back(test_json(r.mcnemar[i]));
    }

    json landmarks = json::object();
    const auto& rel = r.reliability;
    for (double t : {0.5, 0.8, 0.9}) {
        for (std::size_t i = 0; i < rel.thresholds.size(); ++i) {
            if (rel.thresholds[i] == t) landmarks[format_fixed(t, 1)] = rel.fraction_at_or_above[i];
        }
    }

    const json doc = {{"n_slices", b.dice.n},
                      {"fdr_family_size", r.wilcoxon.size()},
                      {"params", stats_params_to_json(r.params)},
                      {"baseline", baseline},
                      {"conditions", conditions},
                      {"tests", tests},
                      {"reliability_landmarks", landmarks}};
    return doc.dump(2) + "\n";
}

std::string table3_markdown(const AuditResult& r) {
    std::vector<std::size_t> order;
    std::size_t clean_index = 0;
    for (std::size_t i = 0; i < r.conditions.size(); ++i) {
        if (r.conditions[i].kind == PerturbationKind::Clean) {
            clean_index = i;
        } else {
            order.push_back(i);
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return r.summaries[a].mean_delta_dice.value_or(0.0) < r.summaries[b].mean_delta_dice.value_or(0.0);
    });
    order.insert(order.begin(), clean_index);

    std::string out = "| Condition | Type | Mean Dice | Δ Dice | Fail Rate (%) |\n";
    out += "|---|---|---|---|---|\n";
    for (std::size_t i : order) {
        const auto& c = r.conditions[i];
        const auto& s = r.summaries[i];
        static constexpr const char* kTypes[] = {"--", "Blur", "Noise", "DownUp", "Contrast", "Gamma"};
        out += "| " + display_label(c) + " | " + kTypes[static_cast<int>(c.kind)] + " | " +
               format_fixed(s.mean_dice, 4) + " | " +
               (s.mean_delta_dice ? format_fixed(*s.mean_delta_dice, 4, true) : std::string("--")) + " | " +
               format_fixed(100.0 * s.failure_rate, 4) + " |\n";
    }
    return out;
}

std::string reliability_tsv_text(const AuditResult& r) {
    std::string out = "threshold\tfraction\n";
    for (std::size_t i = 0; i < r.reliability.thresholds.size(); ++i) {
        out += format_fixed(r.reliability.thresholds[i], 2) + "\t" +
               format_double(r.reliability.fraction_at_or_above[i]) + "\n";
    }
    return out;
}

std::string worst_slices_text(const AuditResult& r) {
    std::string out;
    for (const auto& w : r.worst_slices) {
        if (!(w.dice < kWorstSliceCutoff)) break;
        out += w.slice_id + "\t" + format_double(w.dice) + "\n";
    }
    return out;
}

void emit_statistics(const AuditResult& result, const std::filesystem::path& output_dir) {
    std::error_code ec;
    std::filesystem::create_directories(output_dir, ec);
    if (ec) throw IoError("cannot create " + output_dir.string() + ": " + ec.message());
    write_text(output_dir / "slice_records.csv", records_csv_text(result.records));
    write_text(output_dir / "summary.json", summary_json_text(result));
    write_text(output_dir / "table3.md", table3_markdown(result));
    write_text(output_dir / "reliability.tsv", reliability_tsv_text(result));
    write_text(output_dir / "worst_slices.txt", worst_slices_text(result));
}

void emit_report(const AuditResult& result, const AuditManifest& manifest, const std::filesystem::path& output_dir) {
    emit_statistics(result, output_dir);
    write_text(output_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
}

}  // namespace segaudit
