#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "segaudit/config.hpp"
#include "segaudit/error.hpp"

using namespace segaudit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal() { return json{{"phantom", json::object()}}; }

}  // namespace

TEST(Config, MinimalPhantomDefaults) {
    const auto c = config_from_json(minimal());
    ASSERT_TRUE(c.phantom);
    EXPECT_EQ(c.phantom->dims, (VolumeDims{64, 64, 64}));
    EXPECT_EQ(c.phantom->center_x, 32.0);
    EXPECT_EQ(c.conditions.size(), 11u);
    EXPECT_EQ(c.stats.bootstrap_iterations, 10000u);
    EXPECT_EQ(c.stats.failure_threshold, 0.5);
    EXPECT_EQ(c.window.level, 50.0);
    EXPECT_EQ(c.window.width, 400.0);
    EXPECT_TRUE(std::holds_alternative<BuiltinSpec>(c.predictor));
}

TEST(Config, ShippedExampleParses) {
    const auto c = load_config(fs::path(CONFIG_DIR) / "phantom_threshold.json");
    const auto& b = std::get<BuiltinSpec>(c.predictor);
    EXPECT_EQ(b.kind, BuiltinKind::Threshold);
    EXPECT_EQ(b.param, 128);
    EXPECT_TRUE(c.output_dir.is_absolute());
}

TEST(Config, AllShippedConfigsParse) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(CONFIG_DIR)) {
        if (e.path().extension() != ".json" || e.path().filename().string().starts_with("phantom_spec")) continue;
        EXPECT_NO_THROW(load_config(e.path())) << e.path();
        ++n;
    }
    EXPECT_GE(n, 1u);
}

TEST(Config, RoundTripsThroughCanonicalJson) {
    json doc = minimal();
    doc["conditions"] = {"clean", "blur_k5", {{"kind", "noise"}, {"parameter", 15}, {"severity", "moderate"}}};
    doc["predictor"] = {{"kind", "subprocess"}, {"command", "python3 adapter.py"}, {"request_timeout_s", 30}};
    doc["perturbation"] = {{"blur_sigma", 1.5}, {"contrast_center", 128}};
    doc["run_seed"] = 77;
    doc["workers"] = 3;
    const auto a = config_from_json(doc, "/base");
    const json canon = config_to_json(a);
    const auto b = config_from_json(canon);
    EXPECT_EQ(config_to_json(b), canon);
    EXPECT_EQ(b.conditions[2].severity, Severity::Moderate);
    EXPECT_EQ(b.conditions[2].id, "noise_s15");
    EXPECT_EQ(std::get<SubprocessSpec>(b.predictor).request_timeout.count(), 30000);
    EXPECT_EQ(b.stats.run_seed, 77u);
}

TEST(Config, RelativePathsResolveAgainstConfigDirectory) {
    json doc{{"images_dir", "data/imagesTr"}, {"labels_dir", "/abs/labelsTr"}, {"output_dir", "../out"}};
    const auto c = config_from_json(doc, "/cfg/dir");
    EXPECT_EQ(*c.images_dir, fs::path("/cfg/dir/data/imagesTr"));
    EXPECT_EQ(*c.labels_dir, fs::path("/abs/labelsTr"));
    EXPECT_EQ(c.output_dir, fs::path("/cfg/out"));
}

TEST(Config, RejectsInvalidDocuments) {
    auto bad = [](json doc) { EXPECT_THROW(config_from_json(doc), ParameterError) << doc.dump(); };
    bad(json::array());
    bad(json::object());                                                      // no dataset
    bad({{"phantom", json::object()}, {"typo_key", 1}});                      // unknown key
    bad({{"phantom", json::object()}, {"images_dir", "x"}, {"labels_dir", "y"}});
    bad({{"images_dir", "x"}});
    bad({{"phantom", json::object()}, {"conditions", {"blur_k3"}}});          // no clean
    bad({{"phantom", json::object()}, {"conditions", {"clean", "clean"}}});
    bad({{"phantom", json::object()}, {"conditions", {"clean", "blur_k4"}}});
    bad({{"phantom", json::object()}, {"predictor", {{"kind", "builtin"}, {"name", "sam"}}}});
    bad({{"phantom", json::object()}, {"predictor", {{"kind", "subprocess"}}}});
    bad({{"phantom", json::object()}, {"workers", 0}});
    bad({{"phantom", json::object()}, {"workers", "two"}});
    bad({{"phantom", json::object()}, {"exact_test_cutoff", 61}});
    bad({{"phantom", json::object()}, {"confidence_level", 1.0}});
    bad({{"phantom", {{"radii", {40, 5, 5}}}}});
    bad({{"phantom", {{"dims", {64, 64}}}}});
    bad({{"phantom", json::object()}, {"window", {{"width", 0}}}});
}

TEST(Config, LoadReportsIoAndSyntaxErrors) {
    EXPECT_THROW(load_config("/nonexistent/config.json"), IoError);
    const auto p = fs::temp_directory_path() / ("segaudit_bad_" + std::to_string(::getpid()) + ".json");
    std::ofstream(p) << "{ not json";
    EXPECT_THROW(load_config(p), ParameterError);
    fs::remove(p);
}

TEST(Config, PhantomJsonRoundTrip) {
    PhantomSpec p;
    p.dims = {30, 20, 10};
    p.center_x = 15;
    p.center_y = 10;
    p.center_z = 5;
    p.radius_z = 3;
    p.seed = 12345678901234ULL;
    const auto q = phantom_from_json(phantom_to_json(p));
    EXPECT_EQ(phantom_to_json(q), phantom_to_json(p));
}
