#pragma once

#include <cmath>
#include <cstdint>

#include "segaudit/raster.hpp"

namespace segaudit {

struct WindowSpec {
    double level = 50.0;
    double width = 400.0;
};

/// Inclusive pixel box; x is the column index.
struct BoxPrompt {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    int box_width() const noexcept { return x_max - x_min + 1; }
    int box_height() const noexcept { return y_max - y_min + 1; }
    long long area() const noexcept { return static_cast<long long>(box_width()) * box_height(); }
    bool contains(int x, int y) const noexcept {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
    friend bool operator==(const BoxPrompt&, const BoxPrompt&) = default;
};

/// The one rounding rule used for every 8-bit quantization: half away from zero,
/// then clamped to [0, 255].
inline std::uint8_t quantize_u8(double v) {
    const double r = std::round(v);
    if (!(r > 0.0)) return 0;
    if (r >= 255.0) return 255;
    return static_cast<std::uint8_t>(r);
}

/// Linear HU window to [0, 255] with clipping outside [level - width/2, level + width/2].
std::uint8_t window_value(double hu, const WindowSpec& spec);
Gray8Slice window_hu(const HuSlice& slice, const WindowSpec& spec);

Rgb8Slice to_rgb(const Gray8Slice& gray);
Gray8Slice rgb_channel0(const Rgb8Slice& rgb);

/// Tight box around every foreground pixel, optionally grown by `padding` and
/// clipped to the raster. Throws EmptyMaskError when there is no foreground.
BoxPrompt bbox_from_mask(const MaskSlice& mask, int padding = 0);

}  // namespace segaudit
