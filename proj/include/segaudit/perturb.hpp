#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segaudit/raster.hpp"

namespace segaudit {

enum class PerturbationKind { Clean, Blur, Noise, DownUp, Contrast, Gamma };
enum class Severity { None, Low, Moderate };

std::string_view to_string(PerturbationKind kind);
std::string_view to_string(Severity severity);
PerturbationKind parse_kind(std::string_view s);
Severity parse_severity(std::string_view s);

/// One domain-shift condition. `parameter` is the kernel size (Blur), the noise
/// std-dev in 8-bit counts (Noise), the scale factor (DownUp), the multiplier
/// (Contrast) or the exponent (Gamma); it is unused for Clean.
struct PerturbationCondition {
    std::string id;
    PerturbationKind kind = PerturbationKind::Clean;
    double parameter = 0.0;
    Severity severity = Severity::None;

    friend bool operator==(const PerturbationCondition&, const PerturbationCondition&) = default;
};

/// Builds a validated condition with its canonical id ("clean", "blur_k3",
/// "noise_s10", "downup_0.5", "contrast_1.2", "gamma_0.8", ...).
PerturbationCondition make_condition(PerturbationKind kind, double parameter,
                                     Severity severity = Severity::Low);
PerturbationCondition clean_condition();

/// Inverse of the canonical id. Severity follows the default protocol table when
/// the condition is one of its members, Low otherwise.
PerturbationCondition parse_condition_id(std::string_view id);

/// Clean plus the ten protocol conditions, in protocol order.
std::vector<PerturbationCondition> default_conditions();

/// Throws ParameterError unless the parameter is legal for the kind.
void validate(const PerturbationCondition& cond);

/// Human-readable row label, e.g. "Blur (k=3)" or "Down-Up (×0.5)".
std::string display_label(const PerturbationCondition& cond);

/// Inputs that fix the noise realization of one (slice, condition) task.
struct SeedDerivation {
    std::uint64_t run_seed = 0;
    std::string slice_id;
    std::string condition_id;

    std::uint64_t stream_seed() const noexcept;
};

/// Knobs for choices the protocol leaves open.
struct PerturbOptions {
    /// Overrides the kernel-size-to-sigma rule for every blur condition.
    std::optional<double> blur_sigma;
    /// Pivot of contrast scaling: out = center + a * (v - center).
    double contrast_center = 0.0;
};

/// sigma = 0.3 * ((k - 1) / 2 - 1) + 0.8
double blur_sigma_for_kernel(int k);

/// Normalized 1-D Gaussian taps of length k.
std::vector<double> gaussian_kernel(int k, double sigma);

Gray8Slice gaussian_blur(const Gray8Slice& img, int k, std::optional<double> sigma = std::nullopt);
Gray8Slice add_gaussian_noise(const Gray8Slice& img, double sigma, std::uint64_t stream_seed);

/// Bilinear resize with pixel-center alignment and edge clamping.
Gray8Slice resize_bilinear(const Gray8Slice& img, int out_width, int out_height);
Gray8Slice down_up(const Gray8Slice& img, double scale);

Gray8Slice contrast_scale(const Gray8Slice& img, double a, double center = 0.0);
Gray8Slice gamma_correct(const Gray8Slice& img, double g);

Gray8Slice apply_condition(const Gray8Slice& img, const PerturbationCondition& cond,
                           const SeedDerivation& seeds, const PerturbOptions& options = {});

}  // namespace segaudit
