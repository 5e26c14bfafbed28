#include "segaudit/predictor.hpp"

#include <unistd.h>

#include <atomic>
#include <nlohmann/json.hpp>

#include "segaudit/pnm.hpp"
#include "segaudit/subprocess.hpp"

namespace segaudit {
namespace {

using nlohmann::json;

class BuiltinSession final : public PredictorSession {
public:
    explicit BuiltinSession(BuiltinSpec spec) : spec_(spec), name_(describe(PredictorSpec{spec})) {}

    const std::string& name() const override { return name_; }

    PredictResponse predict(const PredictRequest& request, const MaskSlice& ground_truth) override {
        return {request.id, builtin_predict(spec_, request.image, request.box, ground_truth)};
    }

    ShutdownStatus shutdown() override { return {}; }
    bool alive() const override { return true; }

private:
    BuiltinSpec spec_;
    std::string name_;
};

std::filesystem::path unique_scratch(const std::filesystem::path& root) {
    static std::atomic<unsigned> counter{0};
    const std::filesystem::path base = root.empty() ? std::filesystem::temp_directory_path() / "segaudit" : root;
    auto dir = base / ("session-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return std::filesystem::absolute(dir);
}

json parse_line(const std::string& line) {
    json msg;
    try {
        msg = json::parse(line);
    } catch (const json::parse_error&) {
        throw ProtocolError("malformed JSON from predictor", line);
    }
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
        throw ProtocolError("predictor message lacks a string \"type\"", line);
    return msg;
}

class SubprocessSession final : public PredictorSession {
public:
    explicit SubprocessSession(const SubprocessSpec& spec)
        : spec_(spec), scratch_(unique_scratch(spec.scratch_dir)), child_(spec.command) {
        try {
            handshake();
        } catch (...) {
            child_.kill();
            std::error_code ec;
            std::filesystem::remove_all(scratch_, ec);
            throw;
        }
    }

    ~SubprocessSession() override {
        if (alive_) {
            try {
                shutdown();
            } catch (...) {
            }
        }
        std::error_code ec;
        std::filesystem::remove_all(scratch_, ec);
    }

    const std::string& name() const override { return name_; }
    bool alive() const override { return alive_; }

    PredictResponse predict(const PredictRequest& request, const MaskSlice&) override {
        if (!alive_) throw PredictorError("predictor session is not alive");
        const auto image_path = scratch_ / ("request-" + std::to_string(serial_++) + ".ppm");
        write_ppm(image_path, request.image);
        struct Cleanup {
            std::filesystem::path path;
            ~Cleanup() {
                std::error_code ec;
                std::filesystem::remove(path, ec);
            }
        } cleanup{image_path};

        const json req = {{"type", "predict"},
                          {"id", request.id},
                          {"image", image_path.string()},
                          {"box", {request.box.x_min, request.box.y_min, request.box.x_max, request.box.y_max}}};
        const json reply = exchange(req.dump(), spec_.request_timeout);
        const std::string type = reply["type"];
        if (type == "error") {
            throw PredictorError("predictor error for " + request.id + ": " + reply.value("message", std::string{}));
        }
        if (type != "mask") desync(ProtocolError("expected a \"mask\" reply", reply.dump()));
        if (!reply.contains("id") || !reply["id"].is_string() || reply["id"] != request.id)
            desync(ProtocolError("reply id does not match request " + request.id, reply.dump()));
        if (!reply.contains("mask") || !reply["mask"].is_string())
            desync(ProtocolError("mask reply lacks a \"mask\" path", reply.dump()));

        const std::filesystem::path mask_path = reply["mask"].get<std::string>();
        MaskSlice mask = read_mask_pgm(mask_path);
        std::error_code ec;
        if (mask_path.parent_path() == scratch_) std::filesystem::remove(mask_path, ec);
        if (!mask.same_shape(request.image))
            throw DimensionError("predictor mask for " + request.id + " is " + std::to_string(mask.width) + "x" +
                                 std::to_string(mask.height) + ", image is " + std::to_string(request.image.width) +
                                 "x" + std::to_string(request.image.height));
        return {request.id, std::move(mask)};
    }

    ShutdownStatus shutdown() override {
        if (!alive_) return last_shutdown_;
        alive_ = false;
        try {
            child_.write_line(json{{"type", "shutdown"}}.dump());
        } catch (const PredictorError&) {
            // already gone; wait() reports how it ended
        }
        child_.close_stdin();
        last_shutdown_ = child_.wait(spec_.shutdown_timeout);
        return last_shutdown_;
    }

private:
    void handshake() {
        const json hello = {{"type", "hello"}, {"version", kProtocolVersion}};
        const json reply = exchange(hello.dump(), spec_.handshake_timeout);
        if (reply["type"] == "error")
            throw ProtocolError("predictor rejected handshake", reply.dump());
        if (reply["type"] != "ready") throw ProtocolError("expected a \"ready\" reply", reply.dump());
        if (reply.contains("version") && reply["version"] != kProtocolVersion)
            throw ProtocolError("protocol version mismatch (harness speaks " + std::to_string(kProtocolVersion) + ")",
                                reply.dump());
        if (!reply.contains("name") || !reply["name"].is_string())
            throw ProtocolError("ready reply lacks a string \"name\"", reply.dump());
        name_ = reply["name"];
        alive_ = true;
    }

    json exchange(const std::string& line, std::chrono::milliseconds timeout) {
        try {
            child_.write_line(line);
            for (;;) {
                auto reply = child_.read_line(timeout);
                if (!reply) {
                    child_.kill();
                    alive_ = false;
                    throw PredictorError("predictor timed out after " + std::to_string(timeout.count()) + " ms");
                }
                if (reply->find_first_not_of(" \t") == std::string::npos) continue;
                try {
                    return parse_line(*reply);
                } catch (const ProtocolError& e) {
                    desync(e);
                }
            }
        } catch (const PredictorError&) {
            // A closed pipe can be seen before the exit is reapable; the
            // session is unusable either way.
            if (alive_) {
                alive_ = false;
                child_.close_stdin();
                last_shutdown_ = child_.wait(std::chrono::milliseconds(200));
            }
            throw;
        }
    }

    [[noreturn]] void desync(const ProtocolError& error) {
        child_.kill();
        alive_ = false;
        throw error;
    }

    SubprocessSpec spec_;
    std::filesystem::path scratch_;
    ChildProcess child_;
    std::string name_;
    bool alive_ = false;
    unsigned long serial_ = 0;
    ShutdownStatus last_shutdown_;
};

}  // namespace

std::string_view to_string(BuiltinKind kind) {
    switch (kind) {
        case BuiltinKind::Oracle: return "oracle";
        case BuiltinKind::ErodedOracle: return "eroded_oracle";
        case BuiltinKind::BoxFill: return "box_fill";
        case BuiltinKind::Threshold: return "threshold";
        case BuiltinKind::Empty: return "empty";
    }
    return "?";
}

BuiltinKind parse_builtin_kind(std::string_view name) {
    for (auto k : {BuiltinKind::Oracle, BuiltinKind::ErodedOracle, BuiltinKind::BoxFill, BuiltinKind::Threshold,
                   BuiltinKind::Empty}) {
        if (to_string(k) == name) return k;
    }
    throw ParameterError("unknown builtin predictor '" + std::string(name) + "'");
}

std::string describe(const PredictorSpec& spec) {
    if (const auto* b = std::get_if<BuiltinSpec>(&spec)) {
        std::string name(to_string(b->kind));
        if (b->kind == BuiltinKind::ErodedOracle || b->kind == BuiltinKind::Threshold)
            name += "(" + std::to_string(b->param) + ")";
        return name;
    }
    return "subprocess";
}

void validate(const PredictorSpec& spec) {
    if (const auto* b = std::get_if<BuiltinSpec>(&spec)) {
        if (b->kind == BuiltinKind::ErodedOracle && b->param < 0)
            throw ParameterError("erosion radius must be >= 0");
        if (b->kind == BuiltinKind::Threshold && (b->param < 0 || b->param > 255))
            throw ParameterError("threshold must lie in [0, 255]");
        return;
    }
    const auto& s = std::get<SubprocessSpec>(spec);
    if (s.command.empty()) throw ParameterError("subprocess predictor command is empty");
    if (s.request_timeout.count() <= 0 || s.handshake_timeout.count() <= 0 || s.shutdown_timeout.count() < 0)
        throw ParameterError("predictor timeouts must be positive");
}

std::unique_ptr<PredictorSession> spawn(const PredictorSpec& spec) {
    validate(spec);
    if (const auto* b = std::get_if<BuiltinSpec>(&spec)) return std::make_unique<BuiltinSession>(*b);
    return std::make_unique<SubprocessSession>(std::get<SubprocessSpec>(spec));
}

MaskSlice erode4(const MaskSlice& mask, int iterations) {
    MaskSlice cur = mask;
    for (int it = 0; it < iterations; ++it) {
        MaskSlice next(cur.width, cur.height, 0);
        for (int y = 0; y < cur.height; ++y) {
            for (int x = 0; x < cur.width; ++x) {
                if (!cur.at(x, y)) continue;
                const bool keep = x > 0 && x + 1 < cur.width && y > 0 && y + 1 < cur.height && cur.at(x - 1, y) &&
                                  cur.at(x + 1, y) && cur.at(x, y - 1) && cur.at(x, y + 1);
                next.at(x, y) = keep ? 1 : 0;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

MaskSlice builtin_predict(const BuiltinSpec& spec, const Rgb8Slice& image, const BoxPrompt& box,
                          const MaskSlice& ground_truth) {
    require_same_shape(image, ground_truth, "builtin predictor");
    if (box.x_min < 0 || box.y_min < 0 || box.x_max >= image.width || box.y_max >= image.height ||
        box.x_min > box.x_max || box.y_min > box.y_max)
        throw ParameterError("box prompt outside the image");

    switch (spec.kind) {
        case BuiltinKind::Oracle: return ground_truth;
        case BuiltinKind::ErodedOracle: return erode4(ground_truth, spec.param);
        case BuiltinKind::Empty: return MaskSlice(image.width, image.height, 0);
        case BuiltinKind::BoxFill:
        case BuiltinKind::Threshold: {
            MaskSlice out(image.width, image.height, 0);
            for (int y = box.y_min; y <= box.y_max; ++y) {
                for (int x = box.x_min; x <= box.x_max; ++x) {
                    const bool fg = spec.kind == BuiltinKind::BoxFill || image.at(x, y).r >= spec.param;
                    out.at(x, y) = fg ? 1 : 0;
                }
            }
            return out;
        }
    }
    throw ParameterError("unhandled builtin predictor");
}

}  // namespace segaudit
