#include "segaudit/protocol_check.hpp"

#include <unistd.h>

#include <algorithm>
#include <nlohmann/json.hpp>

#include "segaudit/pnm.hpp"
#include "segaudit/predictor.hpp"
#include "segaudit/subprocess.hpp"

namespace segaudit {
namespace {

using nlohmann::json;

class StepFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

json read_message(ChildProcess& child, std::chrono::milliseconds timeout) {
    for (;;) {
        const auto line = child.read_line(timeout);
        if (!line) throw StepFailure("no reply within " + std::to_string(timeout.count()) + " ms");
        if (line->find_first_not_of(" \t") == std::string::npos) continue;
        json msg;
        try {
            msg = json::parse(*line);
        } catch (const json::parse_error&) {
            throw StepFailure("malformed JSON: " + *line);
        }
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
            throw StepFailure("message without a string \"type\": " + *line);
        return msg;
    }
}

MaskSlice request_mask(ChildProcess& child, const std::filesystem::path& scratch, const std::string& id,
                       const Rgb8Slice& image, const BoxPrompt& box, std::chrono::milliseconds timeout) {
    const auto image_path = scratch / (id + ".ppm");
    write_ppm(image_path, image);
    child.write_line(json{{"type", "predict"},
                          {"id", id},
                          {"image", image_path.string()},
                          {"box", {box.x_min, box.y_min, box.x_max, box.y_max}}}
                         .dump());
    const json reply = read_message(child, timeout);
    if (reply["type"] != "mask") throw StepFailure("expected a mask reply, got " + reply.dump());
    if (!reply.contains("id") || reply["id"] != id) throw StepFailure("reply id mismatch: " + reply.dump());
    if (!reply.contains("mask") || !reply["mask"].is_string()) throw StepFailure("mask path missing: " + reply.dump());
    MaskSlice mask;
    try {
        mask = read_mask_pgm(reply["mask"].get<std::string>());
    } catch (const Error& e) {
        throw StepFailure(std::string("unreadable mask: ") + e.what());
    }
    if (!mask.same_shape(image))
        throw StepFailure("mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                          ", image is " + std::to_string(image.width) + "x" + std::to_string(image.height));
    return mask;
}

}  // namespace

Rgb8Slice golden_protocol_image() {
    Rgb8Slice img(40, 30);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            auto v = static_cast<std::uint8_t>(40 + 2 * x + y);
            if (x >= 12 && x <= 27 && y >= 9 && y <= 20) v = 200;
            img.at(x, y) = {v, v, v};
        }
    }
    return img;
}

BoxPrompt golden_protocol_box() { return {12, 9, 27, 20}; }

bool ProtocolCheckReport::passed() const {
    return !steps.empty() && std::all_of(steps.begin(), steps.end(), [](const auto& s) { return s.passed; }) &&
           steps.back().name == "shutdown";
}

ProtocolCheckReport run_protocol_check(const ProtocolCheckOptions& options) {
    ProtocolCheckReport report;
    const auto base = options.scratch_dir.empty() ? std::filesystem::temp_directory_path() : options.scratch_dir;
    const auto scratch = std::filesystem::absolute(base / ("protocol-check-" + std::to_string(::getpid())));
    std::filesystem::create_directories(scratch);

    std::unique_ptr<ChildProcess> child;
    auto step = [&](const std::string& name, auto&& body) {
        ProtocolCheckStep s{name, false, {}};
        try {
            s.detail = body();
            s.passed = true;
        } catch (const std::exception& e) {
            s.detail = e.what();
        }
        report.steps.push_back(s);
        return s.passed;
    };

    const bool ok =
        step("handshake",
             [&] {
                 child = std::make_unique<ChildProcess>(options.command);
                 child->write_line(json{{"type", "hello"}, {"version", kProtocolVersion}}.dump());
                 const json reply = read_message(*child, options.timeout);
                 if (reply["type"] != "ready") throw StepFailure("expected ready, got " + reply.dump());
                 if (reply.contains("version") && reply["version"] != kProtocolVersion)
                     throw StepFailure("protocol version mismatch: " + reply.dump());
                 if (!reply.contains("name") || !reply["name"].is_string())
                     throw StepFailure("ready reply lacks a name: " + reply.dump());
                 report.predictor_name = reply["name"];
                 return "ready: " + report.predictor_name;
             }) &&
        step("unknown-type",
             [&] {
                 child->write_line(json{{"type", "frobnicate"}, {"id", "probe-1"}}.dump());
                 const json reply = read_message(*child, options.timeout);
                 if (reply["type"] != "error") throw StepFailure("expected an error reply, got " + reply.dump());
                 return std::string("error reply received");
             }) &&
        step("golden-request",
             [&] {
                 const MaskSlice mask = request_mask(*child, scratch, "golden-0001", golden_protocol_image(),
                                                     golden_protocol_box(), options.timeout);
                 if (options.expected_mask) {
                     const MaskSlice expected = read_mask_pgm(*options.expected_mask);
                     if (!(expected == mask)) throw StepFailure("mask differs from " + options.expected_mask->string());
                     return std::string("mask matches golden fixture");
                 }
                 return "binary mask, " + std::to_string(foreground_count(mask)) + " foreground pixels";
             }) &&
        step("dimension-validation",
             [&] {
                 Rgb8Slice other(23, 17, Rgb8{90, 90, 90});
                 request_mask(*child, scratch, "dims-0002", other, BoxPrompt{3, 2, 19, 14}, options.timeout);
                 return std::string("23x17 request answered with 23x17 mask");
             }) &&
        step("shutdown", [&] {
            child->write_line(json{{"type", "shutdown"}}.dump());
            child->close_stdin();
            const ShutdownStatus st = child->wait(options.timeout);
            if (st.forced_kill) throw StepFailure("child did not exit: " + st.detail);
            if (st.exit_code != 0) throw StepFailure("exit code " + std::to_string(st.exit_code));
            return std::string("exit code 0");
        });
    (void)ok;

    if (child) child->kill();
    std::error_code ec;
    std::filesystem::remove_all(scratch, ec);
    return report;
}

}  // namespace segaudit
