#include "segaudit/perturb.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "segaudit/preprocess.hpp"
#include "segaudit/rng.hpp"
#include "segaudit/text.hpp"

namespace segaudit {
namespace {

struct ProtocolEntry {
    PerturbationKind kind;
    double parameter;
    Severity severity;
};

// Two severity levels per perturbation type.
constexpr std::array<ProtocolEntry, 10> kProtocol{{
    {PerturbationKind::Blur, 3, Severity::Low},
    {PerturbationKind::Blur, 7, Severity::Moderate},
    {PerturbationKind::Noise, 10, Severity::Low},
    {PerturbationKind::Noise, 25, Severity::Moderate},
    {PerturbationKind::DownUp, 0.5, Severity::Low},
    {PerturbationKind::DownUp, 0.25, Severity::Moderate},
    {PerturbationKind::Contrast, 0.8, Severity::Low},
    {PerturbationKind::Contrast, 1.2, Severity::Low},
    {PerturbationKind::Gamma, 0.8, Severity::Low},
    {PerturbationKind::Gamma, 1.2, Severity::Low},
}};

std::string canonical_id(PerturbationKind kind, double p) {
    switch (kind) {
        case PerturbationKind::Clean: return "clean";
        case PerturbationKind::Blur: return "blur_k" + format_double(p);
        case PerturbationKind::Noise: return "noise_s" + format_double(p);
        case PerturbationKind::DownUp: return "downup_" + format_double(p);
        case PerturbationKind::Contrast: return "contrast_" + format_double(p);
        case PerturbationKind::Gamma: return "gamma_" + format_double(p);
    }
    return {};
}

// Symmetric reflection with the edge sample repeated: ... c b a | a b c ... c | c b ...
int reflect(int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

Gray8Slice map_lut(const Gray8Slice& img, const std::array<std::uint8_t, 256>& lut) {
    Gray8Slice out(img.width, img.height);
    std::transform(img.pixels.begin(), img.pixels.end(), out.pixels.begin(), [&](std::uint8_t v) { return lut[v]; });
    return out;
}

int kernel_size_of(const PerturbationCondition& cond) { return static_cast<int>(cond.parameter); }

}  // namespace

std::string_view to_string(PerturbationKind kind) {
    switch (kind) {
        case PerturbationKind::Clean: return "clean";
        case PerturbationKind::Blur: return "blur";
        case PerturbationKind::Noise: return "noise";
        case PerturbationKind::DownUp: return "downup";
        case PerturbationKind::Contrast: return "contrast";
        case PerturbationKind::Gamma: return "gamma";
    }
    return "?";
}

std::string_view to_string(Severity severity) {
    switch (severity) {
        case Severity::None: return "none";
        case Severity::Low: return "low";
        case Severity::Moderate: return "moderate";
    }
    return "?";
}

PerturbationKind parse_kind(std::string_view s) {
    for (auto k : {PerturbationKind::Clean, PerturbationKind::Blur, PerturbationKind::Noise, PerturbationKind::DownUp,
                   PerturbationKind::Contrast, PerturbationKind::Gamma}) {
        if (to_string(k) == s) return k;
    }
    throw ParameterError("unknown perturbation kind '" + std::string(s) + "'");
}

Severity parse_severity(std::string_view s) {
    for (auto v : {Severity::None, Severity::Low, Severity::Moderate}) {
        if (to_string(v) == s) return v;
    }
    throw ParameterError("unknown severity '" + std::string(s) + "'");
}

void validate(const PerturbationCondition& cond) {
    const double p = cond.parameter;
    if (!std::isfinite(p)) throw ParameterError(cond.id + ": parameter must be finite");
    switch (cond.kind) {
        case PerturbationKind::Clean: break;
        case PerturbationKind::Blur:
            if (p < 1 || p != std::floor(p) || static_cast<long>(p) % 2 == 0 || p > 1001)
                throw ParameterError(cond.id + ": blur kernel size must be an odd integer >= 1");
            break;
        case PerturbationKind::Noise:
            if (p < 0) throw ParameterError(cond.id + ": noise sigma must be >= 0");
            break;
        case PerturbationKind::DownUp:
            if (!(p > 0 && p <= 1)) throw ParameterError(cond.id + ": scale must lie in (0, 1]");
            break;
        case PerturbationKind::Contrast:
            if (!(p > 0)) throw ParameterError(cond.id + ": contrast multiplier must be > 0");
            break;
        case PerturbationKind::Gamma:
            if (!(p > 0)) throw ParameterError(cond.id + ": gamma exponent must be > 0");
            break;
    }
}

PerturbationCondition make_condition(PerturbationKind kind, double parameter, Severity severity) {
    PerturbationCondition cond;
    cond.kind = kind;
    cond.parameter = kind == PerturbationKind::Clean ? 0.0 : parameter;
    cond.severity = kind == PerturbationKind::Clean ? Severity::None : severity;
    cond.id = canonical_id(kind, cond.parameter);
    validate(cond);
    return cond;
}

PerturbationCondition clean_condition() { return make_condition(PerturbationKind::Clean, 0.0, Severity::None); }

PerturbationCondition parse_condition_id(std::string_view id) {
    if (id == "clean") return clean_condition();
    struct Prefix {
        std::string_view text;
        PerturbationKind kind;
    };
    constexpr std::array<Prefix, 5> prefixes{{{"blur_k", PerturbationKind::Blur},
                                              {"noise_s", PerturbationKind::Noise},
                                              {"downup_", PerturbationKind::DownUp},
                                              {"contrast_", PerturbationKind::Contrast},
                                              {"gamma_", PerturbationKind::Gamma}}};
    for (const auto& prefix : prefixes) {
        if (!id.starts_with(prefix.text)) continue;
        const std::string rest(id.substr(prefix.text.size()));
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(rest, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != rest.size()) break;
        Severity severity = Severity::Low;
        for (const auto& e : kProtocol) {
            if (e.kind == prefix.kind && e.parameter == value) severity = e.severity;
        }
        auto cond = make_condition(prefix.kind, value, severity);
        if (cond.id != id) throw ParameterError("condition id '" + std::string(id) + "' is not canonical");
        return cond;
    }
    throw ParameterError("unrecognized condition id '" + std::string(id) + "'");
}

std::vector<PerturbationCondition> default_conditions() {
    std::vector<PerturbationCondition> out{clean_condition()};
    for (const auto& e : kProtocol) out.push_back(make_condition(e.kind, e.parameter, e.severity));
    return out;
}

std::string display_label(const PerturbationCondition& cond) {
    const std::string p = format_double(cond.parameter);
    switch (cond.kind) {
        case PerturbationKind::Clean: return "Clean (baseline)";
        case PerturbationKind::Blur: return "Blur (k=" + p + ")";
        case PerturbationKind::Noise: return "Noise (σ=" + p + ")";
        case PerturbationKind::DownUp: return "Down-Up (×" + p + ")";
        case PerturbationKind::Contrast: return "Contrast (×" + p + ")";
        case PerturbationKind::Gamma: return "Gamma (γ=" + p + ")";
    }
    return cond.id;
}

std::uint64_t SeedDerivation::stream_seed() const noexcept { return derive_seed(run_seed, slice_id, condition_id); }

double blur_sigma_for_kernel(int k) { return 0.3 * ((k - 1) / 2.0 - 1.0) + 0.8; }

std::vector<double> gaussian_kernel(int k, double sigma) {
    if (k < 1 || k % 2 == 0) throw ParameterError("blur kernel size must be an odd integer >= 1");
    if (!(sigma > 0)) throw ParameterError("blur sigma must be > 0");
    const int r = k / 2;
    std::vector<double> taps(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        const double d = i - r;
        taps[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        sum += taps[static_cast<std::size_t>(i)];
    }
    for (auto& t : taps) t /= sum;
    return taps;
}

Gray8Slice gaussian_blur(const Gray8Slice& img, int k, std::optional<double> sigma) {
    const auto taps = gaussian_kernel(k, sigma.value_or(blur_sigma_for_kernel(k)));
    if (k == 1) return img;
    const int r = k / 2;
    const int w = img.width;
    const int h = img.height;

    std::vector<double> rows(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += taps[static_cast<std::size_t>(i + r)] * img.at(reflect(x + i, w), y);
            rows[img.index(x, y)] = acc;
        }
    }
    Gray8Slice out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += taps[static_cast<std::size_t>(i + r)] * rows[img.index(x, reflect(y + i, h))];
            out.at(x, y) = quantize_u8(acc);
        }
    }
    return out;
}

Gray8Slice add_gaussian_noise(const Gray8Slice& img, double sigma, std::uint64_t stream_seed) {
    if (!(sigma >= 0)) throw ParameterError("noise sigma must be >= 0");
    if (sigma == 0) return img;
    RandomStream stream(stream_seed);
    Gray8Slice out(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) out.pixels[i] = quantize_u8(img.pixels[i] + sigma * stream.normal());
    return out;
}

Gray8Slice resize_bilinear(const Gray8Slice& img, int out_width, int out_height) {
    if (out_width < 1 || out_height < 1) throw ParameterError("resize target must be at least 1x1");
    const double sx = static_cast<double>(img.width) / out_width;
    const double sy = static_cast<double>(img.height) / out_height;

    struct Tap {
        int i0, i1;
        double f;
    };
    auto taps_for = [](int n_out, int n_in, double inv_scale) {
        std::vector<Tap> taps(static_cast<std::size_t>(n_out));
        for (int d = 0; d < n_out; ++d) {
            const double src = std::clamp((d + 0.5) * inv_scale - 0.5, 0.0, static_cast<double>(n_in - 1));
            const int i0 = static_cast<int>(std::floor(src));
            const int i1 = std::min(i0 + 1, n_in - 1);
            taps[static_cast<std::size_t>(d)] = {i0, i1, src - i0};
        }
        return taps;
    };
    const auto tx = taps_for(out_width, img.width, sx);
    const auto ty = taps_for(out_height, img.height, sy);

    Gray8Slice out(out_width, out_height);
    for (int y = 0; y < out_height; ++y) {
        const Tap& vy = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < out_width; ++x) {
            const Tap& vx = tx[static_cast<std::size_t>(x)];
            const double top = (1 - vx.f) * img.at(vx.i0, vy.i0) + vx.f * img.at(vx.i1, vy.i0);
            const double bottom = (1 - vx.f) * img.at(vx.i0, vy.i1) + vx.f * img.at(vx.i1, vy.i1);
            out.at(x, y) = quantize_u8((1 - vy.f) * top + vy.f * bottom);
        }
    }
    return out;
}

Gray8Slice down_up(const Gray8Slice& img, double scale) {
    if (!(scale > 0 && scale <= 1)) throw ParameterError("down_up scale must lie in (0, 1]");
    if (scale == 1) return img;
    const auto iw = static_cast<int>(std::round(img.width * scale));
    const auto ih = static_cast<int>(std::round(img.height * scale));
    if (iw < 1 || ih < 1) throw ParameterError("down_up scale produces an empty intermediate image");
    return resize_bilinear(resize_bilinear(img, iw, ih), img.width, img.height);
}

Gray8Slice contrast_scale(const Gray8Slice& img, double a, double center) {
    if (!(a > 0)) throw ParameterError("contrast multiplier must be > 0");
    std::array<std::uint8_t, 256> lut{};
    for (int v = 0; v < 256; ++v) lut[static_cast<std::size_t>(v)] = quantize_u8(center + a * (v - center));
    return map_lut(img, lut);
}

Gray8Slice gamma_correct(const Gray8Slice& img, double g) {
    if (!(g > 0)) throw ParameterError("gamma exponent must be > 0");
    std::array<std::uint8_t, 256> lut{};
    for (int v = 0; v < 256; ++v) lut[static_cast<std::size_t>(v)] = quantize_u8(255.0 * std::pow(v / 255.0, g));
    return map_lut(img, lut);
}

Gray8Slice apply_condition(const Gray8Slice& img, const PerturbationCondition& cond, const SeedDerivation& seeds,
                           const PerturbOptions& options) {
    validate(cond);
    switch (cond.kind) {
        case PerturbationKind::Clean: return img;
        case PerturbationKind::Blur: return gaussian_blur(img, kernel_size_of(cond), options.blur_sigma);
        case PerturbationKind::Noise: return add_gaussian_noise(img, cond.parameter, seeds.stream_seed());
        case PerturbationKind::DownUp: return down_up(img, cond.parameter);
        case PerturbationKind::Contrast: return contrast_scale(img, cond.parameter, options.contrast_center);
        case PerturbationKind::Gamma: return gamma_correct(img, cond.parameter);
    }
    throw ParameterError("unhandled perturbation kind");
}

}  // namespace segaudit
