#include "segaudit/config.hpp"

#include <fstream>
#include <set>

namespace segaudit {
namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal();
}

void reject_unknown_keys(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : doc.items()) {
        if (!allowed.count(key)) throw ParameterError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
    if (!doc.contains(key) || doc[key].is_null()) return fallback;
    try {
        return doc[key].get<T>();
    } catch (const json::exception& e) {
        throw ParameterError(std::string("config key '") + key + "': " + e.what());
    }
}

std::array<double, 3> triple(const json& doc, const char* key, std::array<double, 3> fallback) {
    if (!doc.contains(key)) return fallback;
    const auto& v = doc[key];
    if (!v.is_array() || v.size() != 3) throw ParameterError(std::string("phantom '") + key + "' must be [x, y, z]");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

std::pair<double, double> mean_std(const json& doc, const char* key, std::pair<double, double> fallback) {
    if (!doc.contains(key)) return fallback;
    const auto& v = doc[key];
    if (!v.is_array() || v.size() != 2) throw ParameterError(std::string("phantom '") + key + "' must be [mean, std]");
    return {v[0].get<double>(), v[1].get<double>()};
}

PerturbationCondition condition_from_json(const json& entry) {
    if (entry.is_string()) return parse_condition_id(entry.get<std::string>());
    if (!entry.is_object()) throw ParameterError("condition entries must be ids or objects");
    reject_unknown_keys(entry, {"kind", "parameter", "severity"}, "condition");
    const auto kind = parse_kind(get_or<std::string>(entry, "kind", ""));
    if (kind == PerturbationKind::Clean) return clean_condition();
    if (!entry.contains("parameter")) throw ParameterError("condition object needs a 'parameter'");
    const double parameter = entry["parameter"].get<double>();
    if (entry.contains("severity"))
        return make_condition(kind, parameter, parse_severity(entry["severity"].get<std::string>()));
    return parse_condition_id(make_condition(kind, parameter).id);
}

json condition_to_json(const PerturbationCondition& c) {
    if (c.kind == PerturbationKind::Clean) return {{"kind", "clean"}};
    return {{"kind", to_string(c.kind)}, {"parameter", c.parameter}, {"severity", to_string(c.severity)}};
}

PredictorSpec predictor_from_json(const json& doc, const std::filesystem::path& base) {
    if (!doc.is_object()) throw ParameterError("'predictor' must be an object");
    const auto kind = get_or<std::string>(doc, "kind", "builtin");
    if (kind == "builtin") {
        reject_unknown_keys(doc, {"kind", "name", "threshold", "radius"}, "predictor");
        BuiltinSpec b;
        b.kind = parse_builtin_kind(get_or<std::string>(doc, "name", "oracle"));
        if (b.kind == BuiltinKind::Threshold) b.param = get_or<int>(doc, "threshold", 128);
        if (b.kind == BuiltinKind::ErodedOracle) b.param = get_or<int>(doc, "radius", 1);
        return b;
    }
    if (kind == "subprocess") {
        reject_unknown_keys(doc,
                            {"kind", "command", "scratch_dir", "request_timeout_s", "handshake_timeout_s",
                             "shutdown_timeout_s"},
                            "predictor");
        SubprocessSpec s;
        s.command = get_or<std::string>(doc, "command", "");
        if (doc.contains("scratch_dir")) s.scratch_dir = resolve(base, doc["scratch_dir"].get<std::string>());
        auto ms = [](double seconds) { return std::chrono::milliseconds(static_cast<long long>(seconds * 1000.0)); };
        s.request_timeout = ms(get_or<double>(doc, "request_timeout_s", 120.0));
        s.handshake_timeout = ms(get_or<double>(doc, "handshake_timeout_s", 120.0));
        s.shutdown_timeout = ms(get_or<double>(doc, "shutdown_timeout_s", 10.0));
        return s;
    }
    throw ParameterError("predictor kind must be 'builtin' or 'subprocess'");
}

json predictor_to_json(const PredictorSpec& spec) {
    if (const auto* b = std::get_if<BuiltinSpec>(&spec)) {
        json j = {{"kind", "builtin"}, {"name", to_string(b->kind)}};
        if (b->kind == BuiltinKind::Threshold) j["threshold"] = b->param;
        if (b->kind == BuiltinKind::ErodedOracle) j["radius"] = b->param;
        return j;
    }
    const auto& s = std::get<SubprocessSpec>(spec);
    return {{"kind", "subprocess"},
            {"command", s.command},
            {"scratch_dir", s.scratch_dir.string()},
            {"request_timeout_s", s.request_timeout.count() / 1000.0},
            {"handshake_timeout_s", s.handshake_timeout.count() / 1000.0},
            {"shutdown_timeout_s", s.shutdown_timeout.count() / 1000.0}};
}

}  // namespace

nlohmann::json phantom_to_json(const PhantomSpec& p) {
    return {{"case_id", p.case_id},
            {"dims", {p.dims.width, p.dims.height, p.dims.depth}},
            {"center", {p.center_x, p.center_y, p.center_z}},
            {"radii", {p.radius_x, p.radius_y, p.radius_z}},
            {"organ_hu", {p.organ_hu_mean, p.organ_hu_std}},
            {"background_hu", {p.background_hu_mean, p.background_hu_std}},
            {"seed", p.seed}};
}

PhantomSpec phantom_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParameterError("phantom spec must be an object");
    reject_unknown_keys(doc, {"case_id", "dims", "center", "radii", "organ_hu", "background_hu", "seed"}, "phantom");
    PhantomSpec p;
    p.case_id = get_or<std::string>(doc, "case_id", p.case_id);
    if (doc.contains("dims")) {
        const auto& d = doc["dims"];
        if (!d.is_array() || d.size() != 3) throw ParameterError("phantom 'dims' must be [W, H, D]");
        p.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
    }
    // Centered by default.
    const std::array<double, 3> centre{(p.dims.width - 1) / 2.0, (p.dims.height - 1) / 2.0, (p.dims.depth - 1) / 2.0};
    const auto c = triple(doc, "center", {std::floor(centre[0] + 0.5), std::floor(centre[1] + 0.5),
                                          std::floor(centre[2] + 0.5)});
    const auto r = triple(doc, "radii", {p.radius_x, p.radius_y, p.radius_z});
    std::tie(p.center_x, p.center_y, p.center_z) = std::tuple{c[0], c[1], c[2]};
    std::tie(p.radius_x, p.radius_y, p.radius_z) = std::tuple{r[0], r[1], r[2]};
    std::tie(p.organ_hu_mean, p.organ_hu_std) = mean_std(doc, "organ_hu", {p.organ_hu_mean, p.organ_hu_std});
    std::tie(p.background_hu_mean, p.background_hu_std) =
        mean_std(doc, "background_hu", {p.background_hu_mean, p.background_hu_std});
    p.seed = get_or<std::uint64_t>(doc, "seed", p.seed);
    validate(p);
    return p;
}

nlohmann::json stats_params_to_json(const StatsParams& s) {
    return {{"run_seed", s.run_seed},
            {"failure_threshold", s.failure_threshold},
            {"bootstrap_iterations", s.bootstrap_iterations},
            {"confidence_level", s.confidence_level},
            {"alpha", s.alpha},
            {"exact_test_cutoff", s.exact_test_cutoff}};
}

StatsParams stats_params_from_json(const nlohmann::json& doc) {
    StatsParams s;
    s.run_seed = get_or<std::uint64_t>(doc, "run_seed", s.run_seed);
    s.failure_threshold = get_or<double>(doc, "failure_threshold", s.failure_threshold);
    s.bootstrap_iterations = get_or<std::size_t>(doc, "bootstrap_iterations", s.bootstrap_iterations);
    s.confidence_level = get_or<double>(doc, "confidence_level", s.confidence_level);
    s.alpha = get_or<double>(doc, "alpha", s.alpha);
    s.exact_test_cutoff = get_or<std::size_t>(doc, "exact_test_cutoff", s.exact_test_cutoff);
    return s;
}

void validate(const AuditConfig& config) {
    const bool dirs = config.images_dir.has_value() || config.labels_dir.has_value();
    if (dirs && config.phantom) throw ParameterError("config names both dataset directories and a phantom");
    if (dirs && !(config.images_dir && config.labels_dir))
        throw ParameterError("both images_dir and labels_dir are required");
    if (!dirs && !config.phantom) throw ParameterError("config names no dataset (images_dir/labels_dir or phantom)");
    if (config.phantom) validate(*config.phantom);

    if (!(config.window.width > 0)) throw ParameterError("window width must be positive");
    if (config.box_padding < 0) throw ParameterError("box_padding must be >= 0");

    std::set<std::string> ids;
    std::size_t clean = 0;
    for (const auto& c : config.conditions) {
        validate(c);
        if (!ids.insert(c.id).second) throw ParameterError("duplicate condition id '" + c.id + "'");
        clean += c.kind == PerturbationKind::Clean;
    }
    if (clean != 1) throw ParameterError("conditions must include exactly one clean condition");
    if (config.perturb.blur_sigma && !(*config.perturb.blur_sigma > 0))
        throw ParameterError("blur_sigma must be > 0");

    validate(config.predictor);
    const auto& s = config.stats;
    if (!(s.failure_threshold >= 0 && s.failure_threshold <= 1))
        throw ParameterError("failure_threshold must lie in [0, 1]");
    if (s.bootstrap_iterations == 0) throw ParameterError("bootstrap_iterations must be >= 1");
    if (!(s.confidence_level > 0 && s.confidence_level < 1))
        throw ParameterError("confidence_level must lie in (0, 1)");
    if (!(s.alpha > 0 && s.alpha < 1)) throw ParameterError("alpha must lie in (0, 1)");
    if (s.exact_test_cutoff > 60) throw ParameterError("exact_test_cutoff must be <= 60");
    if (config.workers < 1) throw ParameterError("workers must be >= 1");
    if (!(config.error_budget >= 0 && config.error_budget <= 1))
        throw ParameterError("error_budget must lie in [0, 1]");
}

AuditConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ParameterError("config must be a JSON object");
    reject_unknown_keys(doc,
                        {"images_dir", "labels_dir", "phantom", "window", "box_padding", "conditions", "perturbation",
                         "predictor", "run_seed", "failure_threshold", "bootstrap_iterations", "confidence_level",
                         "alpha", "exact_test_cutoff", "output_dir", "workers", "error_budget"},
                        "config");
    AuditConfig c;
    try {
        if (doc.contains("images_dir")) c.images_dir = resolve(base_dir, doc["images_dir"].get<std::string>());
        if (doc.contains("labels_dir")) c.labels_dir = resolve(base_dir, doc["labels_dir"].get<std::string>());
        if (doc.contains("phantom")) c.phantom = phantom_from_json(doc["phantom"]);
        if (doc.contains("window")) {
            reject_unknown_keys(doc["window"], {"level", "width"}, "window");
            c.window.level = get_or<double>(doc["window"], "level", c.window.level);
            c.window.width = get_or<double>(doc["window"], "width", c.window.width);
        }
        c.box_padding = get_or<int>(doc, "box_padding", 0);
        if (doc.contains("conditions")) {
            if (!doc["conditions"].is_array()) throw ParameterError("'conditions' must be an array");
            c.conditions.clear();
            for (const auto& e : doc["conditions"]) c.conditions.push_back(condition_from_json(e));
        }
        if (doc.contains("perturbation")) {
            const auto& p = doc["perturbation"];
            reject_unknown_keys(p, {"blur_sigma", "contrast_center"}, "perturbation");
            if (p.contains("blur_sigma") && !p["blur_sigma"].is_null()) c.perturb.blur_sigma = p["blur_sigma"].get<double>();
            c.perturb.contrast_center = get_or<double>(p, "contrast_center", 0.0);
        }
        if (doc.contains("predictor")) c.predictor = predictor_from_json(doc["predictor"], base_dir);
        c.stats = stats_params_from_json(doc);
        c.output_dir = resolve(base_dir, get_or<std::string>(doc, "output_dir", "audit_out"));
        c.workers = get_or<int>(doc, "workers", 1);
        c.error_budget = get_or<double>(doc, "error_budget", c.error_budget);
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    validate(c);
    return c;
}

AuditConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParameterError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc, std::filesystem::absolute(path).parent_path());
}

nlohmann::json config_to_json(const AuditConfig& c) {
    json doc;
    if (c.images_dir) doc["images_dir"] = c.images_dir->string();
    if (c.labels_dir) doc["labels_dir"] = c.labels_dir->string();
    if (c.phantom) doc["phantom"] = phantom_to_json(*c.phantom);
    doc["window"] = {{"level", c.window.level}, {"width", c.window.width}};
    doc["box_padding"] = c.box_padding;
    json conds = json::array();
    for (const auto& cond : c.conditions) conds.push_back(condition_to_json(cond));
    doc["conditions"] = conds;
    doc["perturbation"] = {{"blur_sigma", c.perturb.blur_sigma ? json(*c.perturb.blur_sigma) : json(nullptr)},
                           {"contrast_center", c.perturb.contrast_center}};
    doc["predictor"] = predictor_to_json(c.predictor);
    const json stats = stats_params_to_json(c.stats);
    for (const auto& [k, v] : stats.items()) doc[k] = v;
    doc["output_dir"] = c.output_dir.string();
    doc["workers"] = c.workers;
    doc["error_budget"] = c.error_budget;
    return doc;
}

}  // namespace segaudit
