#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>

#include "segaudit/preprocess.hpp"
#include "segaudit/raster.hpp"

namespace segaudit {

inline constexpr int kProtocolVersion = 1;

struct PredictRequest {
    std::string id;
    Rgb8Slice image;
    BoxPrompt box;
};

struct PredictResponse {
    std::string id;
    MaskSlice mask;
};

enum class BuiltinKind { Oracle, ErodedOracle, BoxFill, Threshold, Empty };

/// In-process predictors for verification runs. `param` is the erosion radius
/// for ErodedOracle and the gray threshold for Threshold.
struct BuiltinSpec {
    BuiltinKind kind = BuiltinKind::Oracle;
    int param = 0;
};

struct SubprocessSpec {
    /// Run through /bin/sh -c.
    std::string command;
    std::filesystem::path scratch_dir;
    std::chrono::milliseconds request_timeout{120'000};
    std::chrono::milliseconds handshake_timeout{120'000};
    std::chrono::milliseconds shutdown_timeout{10'000};
};

using PredictorSpec = std::variant<BuiltinSpec, SubprocessSpec>;

std::string_view to_string(BuiltinKind kind);
BuiltinKind parse_builtin_kind(std::string_view name);
/// Stable name of a spec, e.g. "threshold(128)" or "subprocess".
std::string describe(const PredictorSpec& spec);
void validate(const PredictorSpec& spec);

struct ShutdownStatus {
    int exit_code = 0;
    bool forced_kill = false;
    std::string detail;
};

/// A ready predictor. One request in flight at a time; not shareable across
/// threads. Builtins ignore the image except `Threshold`, which reads channel 0
/// inside the box; `ground_truth` is consulted only by the oracle family.
class PredictorSession {
public:
    virtual ~PredictorSession() = default;

    /// Name reported at handshake (the builtin description for builtins).
    virtual const std::string& name() const = 0;
    virtual PredictResponse predict(const PredictRequest& request, const MaskSlice& ground_truth) = 0;
    virtual ShutdownStatus shutdown() = 0;
    /// False once the session can no longer serve requests (child died, protocol desync).
    virtual bool alive() const = 0;
};

std::unique_ptr<PredictorSession> spawn(const PredictorSpec& spec);

/// 4-neighbour binary erosion applied `iterations` times; outside the raster counts as background.
MaskSlice erode4(const MaskSlice& mask, int iterations);

/// The built-in prediction rules, exposed for direct testing.
MaskSlice builtin_predict(const BuiltinSpec& spec, const Rgb8Slice& image, const BoxPrompt& box,
                          const MaskSlice& ground_truth);

}  // namespace segaudit
