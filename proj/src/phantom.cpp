#include "segaudit/phantom.hpp"

#include <cmath>

#include "segaudit/preprocess.hpp"
#include "segaudit/rng.hpp"

namespace segaudit {

void validate(const PhantomSpec& spec) {
    const auto& d = spec.dims;
    if (d.width <= 0 || d.height <= 0 || d.depth <= 0) throw ParameterError("phantom dims must be positive");
    if (!(spec.radius_x > 0 && spec.radius_y > 0 && spec.radius_z > 0))
        throw ParameterError("phantom radii must be positive");
    if (!(spec.organ_hu_std >= 0 && spec.background_hu_std >= 0))
        throw ParameterError("phantom intensity std-devs must be >= 0");
    auto inside = [](double c, double r, int n) { return c - r >= 0.0 && c + r <= n - 1.0; };
    if (!inside(spec.center_x, spec.radius_x, d.width) || !inside(spec.center_y, spec.radius_y, d.height) ||
        !inside(spec.center_z, spec.radius_z, d.depth))
        throw ParameterError("phantom ellipsoid extends outside the volume");
}

bool inside_ellipsoid(const PhantomSpec& spec, int x, int y, int z) noexcept {
    const double dx = (x - spec.center_x) / spec.radius_x;
    const double dy = (y - spec.center_y) / spec.radius_y;
    const double dz = (z - spec.center_z) / spec.radius_z;
    return dx * dx + dy * dy + dz * dz <= 1.0;
}

std::pair<VolumeHU, MaskVolume> generate_phantom(const PhantomSpec& spec) {
    validate(spec);
    VolumeHU image{spec.case_id, spec.dims, std::vector<float>(spec.dims.voxel_count())};
    MaskVolume mask{spec.case_id, spec.dims, std::vector<std::uint8_t>(spec.dims.voxel_count())};

    // One normal draw per voxel in storage order, whatever the region.
    RandomStream stream(spec.seed);
    std::size_t i = 0;
    for (int z = 0; z < spec.dims.depth; ++z) {
        for (int y = 0; y < spec.dims.height; ++y) {
            for (int x = 0; x < spec.dims.width; ++x, ++i) {
                const bool organ = inside_ellipsoid(spec, x, y, z);
                const double noise = stream.normal();
                const double hu = organ ? spec.organ_hu_mean + spec.organ_hu_std * noise
                                        : spec.background_hu_mean + spec.background_hu_std * noise;
                image.voxels[i] = static_cast<float>(hu);
                mask.voxels[i] = organ ? 1 : 0;
            }
        }
    }
    return {std::move(image), std::move(mask)};
}

double expected_boxfill_dice(const MaskSlice& gt) {
    const BoxPrompt box = bbox_from_mask(gt);
    const auto fg = static_cast<double>(foreground_count(gt));
    return 2.0 * fg / (fg + static_cast<double>(box.area()));
}

}  // namespace segaudit
