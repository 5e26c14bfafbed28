#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "segaudit/error.hpp"

namespace segaudit {

/// Row-major 2-D raster. `Tag` distinguishes rasters that share a pixel type
/// but carry different meaning (an 8-bit gray image is not a mask).
template <typename T, typename Tag = void>
struct Raster {
    using value_type = T;

    int width = 0;
    int height = 0;
    std::vector<T> pixels;

    Raster() = default;
    Raster(int w, int h, T fill = T{})
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w <= 0 || h <= 0) throw DimensionError("raster dimensions must be positive");
    }

    std::size_t size() const noexcept { return pixels.size(); }
    bool empty() const noexcept { return pixels.empty(); }

    T& at(int x, int y) { return pixels[index(x, y)]; }
    const T& at(int x, int y) const { return pixels[index(x, y)]; }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
    }

    template <typename U, typename OtherTag>
    bool same_shape(const Raster<U, OtherTag>& other) const noexcept {
        return width == other.width && height == other.height;
    }

    friend bool operator==(const Raster&, const Raster&) = default;
};

struct GrayTag {};
struct MaskTag {};

struct Rgb8 {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

/// Raw CT intensities in Hounsfield units.
using HuSlice = Raster<float>;
/// Windowed 8-bit grayscale image.
using Gray8Slice = Raster<std::uint8_t, GrayTag>;
using Rgb8Slice = Raster<Rgb8>;
/// Binary foreground raster; pixels are exactly 0 (background) or 1 (foreground).
using MaskSlice = Raster<std::uint8_t, MaskTag>;

inline std::size_t foreground_count(const MaskSlice& m) {
    std::size_t n = 0;
    for (auto v : m.pixels) n += (v != 0);
    return n;
}

inline void require_same_shape(const auto& a, const auto& b, const char* what) {
    if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": raster dimensions differ");
}

}  // namespace segaudit
