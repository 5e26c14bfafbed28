#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segaudit/preprocess.hpp"
#include "segaudit/raster.hpp"

namespace segaudit {

/// The fixed request image used for conformance checks (40x30, gradient
/// background with a bright rectangle) and its box prompt.
Rgb8Slice golden_protocol_image();
BoxPrompt golden_protocol_box();

struct ProtocolCheckOptions {
    std::string command;
    std::filesystem::path scratch_dir;
    std::chrono::milliseconds timeout{120'000};
    /// When set, the golden response mask must equal this PGM bit-for-bit.
    std::optional<std::filesystem::path> expected_mask;
};

struct ProtocolCheckStep {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ProtocolCheckReport {
    std::string predictor_name;
    std::vector<ProtocolCheckStep> steps;

    bool passed() const;
};

/// Handshake, unknown-message error reply, golden request, dimension
/// validation on a second image size, and clean shutdown. Stops at the first
/// failing step.
ProtocolCheckReport run_protocol_check(const ProtocolCheckOptions& options);

}  // namespace segaudit
