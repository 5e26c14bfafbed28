#pragma once

#include <filesystem>

#include "segaudit/raster.hpp"

namespace segaudit {

// Binary netpbm files with maxval 255: P5 for gray and masks, P6 for RGB.
// These are the pixel payloads exchanged with subprocess predictors.

void write_pgm(const std::filesystem::path& path, const Gray8Slice& image);
Gray8Slice read_pgm(const std::filesystem::path& path);

void write_ppm(const std::filesystem::path& path, const Rgb8Slice& image);
Rgb8Slice read_ppm(const std::filesystem::path& path);

/// Masks are encoded as 0 (background) / 255 (foreground).
void write_mask_pgm(const std::filesystem::path& path, const MaskSlice& mask);

/// Decodes a 0/255 PGM into a mask. Any other value is a FormatError.
MaskSlice read_mask_pgm(const std::filesystem::path& path);

}  // namespace segaudit
