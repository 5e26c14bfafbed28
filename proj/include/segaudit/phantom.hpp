#pragma once

#include <cstdint>
#include <utility>

#include "segaudit/raster.hpp"
#include "segaudit/volume_io.hpp"

namespace segaudit {

/// Synthetic CT volume with one ellipsoidal "organ". Default intensities are
/// arbitrary values inside the 50/400 window chosen so the organ windows
/// brighter than the background; they are not derived from real scans.
struct PhantomSpec {
    std::string case_id = "case0";
    VolumeDims dims{64, 64, 64};
    double center_x = 32.0;
    double center_y = 32.0;
    double center_z = 32.0;
    double radius_x = 5.0;
    double radius_y = 5.0;
    double radius_z = 5.0;
    double organ_hu_mean = 90.0;
    double organ_hu_std = 10.0;
    double background_hu_mean = -60.0;
    double background_hu_std = 15.0;
    std::uint64_t seed = 0;
};

void validate(const PhantomSpec& spec);

/// Analytic membership: sum of squared normalized offsets <= 1.
bool inside_ellipsoid(const PhantomSpec& spec, int x, int y, int z) noexcept;

std::pair<VolumeHU, MaskVolume> generate_phantom(const PhantomSpec& spec);

/// Dice of the box-fill predictor against `gt`: 2|M| / (|M| + area(bbox(M))).
double expected_boxfill_dice(const MaskSlice& gt);

}  // namespace segaudit
