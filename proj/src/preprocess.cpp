#include "segaudit/preprocess.hpp"

#include <algorithm>

namespace segaudit {

std::uint8_t window_value(double hu, const WindowSpec& spec) {
    const double lo = spec.level - spec.width / 2.0;
    const double hi = spec.level + spec.width / 2.0;
    const double v = std::clamp(hu, lo, hi);
    return quantize_u8((v - lo) / (hi - lo) * 255.0);
}

Gray8Slice window_hu(const HuSlice& slice, const WindowSpec& spec) {
    if (!(spec.width > 0.0)) throw ParameterError("window width must be positive");
    Gray8Slice out(slice.width, slice.height);
    std::transform(slice.pixels.begin(), slice.pixels.end(), out.pixels.begin(),
                   [&](float hu) { return window_value(hu, spec); });
    return out;
}

Rgb8Slice to_rgb(const Gray8Slice& gray) {
    Rgb8Slice out(gray.width, gray.height);
    std::transform(gray.pixels.begin(), gray.pixels.end(), out.pixels.begin(),
                   [](std::uint8_t v) { return Rgb8{v, v, v}; });
    return out;
}

Gray8Slice rgb_channel0(const Rgb8Slice& rgb) {
    Gray8Slice out(rgb.width, rgb.height);
    std::transform(rgb.pixels.begin(), rgb.pixels.end(), out.pixels.begin(), [](const Rgb8& p) { return p.r; });
    return out;
}

BoxPrompt bbox_from_mask(const MaskSlice& mask, int padding) {
    if (padding < 0) throw ParameterError("box padding must be non-negative");
    BoxPrompt box{mask.width, mask.height, -1, -1};
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            box.x_min = std::min(box.x_min, x);
            box.y_min = std::min(box.y_min, y);
            box.x_max = std::max(box.x_max, x);
            box.y_max = std::max(box.y_max, y);
        }
    }
    if (box.x_max < 0) throw EmptyMaskError("bounding box requested for an empty mask");
    box.x_min = std::max(0, box.x_min - padding);
    box.y_min = std::max(0, box.y_min - padding);
    box.x_max = std::min(mask.width - 1, box.x_max + padding);
    box.y_max = std::min(mask.height - 1, box.y_max + padding);
    return box;
}

}  // namespace segaudit
