#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segaudit/raster.hpp"

namespace segaudit {

struct VolumeDims {
    int width = 0;
    int height = 0;
    int depth = 0;

    std::size_t voxel_count() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(depth);
    }
    std::size_t slice_size() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    friend bool operator==(const VolumeDims&, const VolumeDims&) = default;
};

/// CT volume in Hounsfield units, slice-major (x fastest, then y, then z).
struct VolumeHU {
    std::string case_id;
    VolumeDims dims;
    std::vector<float> voxels;

    float at(int x, int y, int z) const {
        return voxels[(static_cast<std::size_t>(z) * dims.height + y) * dims.width + x];
    }
    HuSlice slice(int z) const;
};

/// Binary label volume; voxels are 0 or 1.
struct MaskVolume {
    std::string case_id;
    VolumeDims dims;
    std::vector<std::uint8_t> voxels;

    std::uint8_t at(int x, int y, int z) const {
        return voxels[(static_cast<std::size_t>(z) * dims.height + y) * dims.width + x];
    }
    MaskSlice slice(int z) const;
};

/// One evaluated axial slice: HU raster plus its non-empty ground-truth mask.
struct SlicePair {
    std::string slice_id;
    std::string case_id;
    int z_index = 0;
    HuSlice hu;
    MaskSlice gt;
};

/// NIfTI-1 datatype codes accepted by the reader.
enum class NiftiDatatype : std::int16_t {
    UInt8 = 2,
    Int16 = 4,
    Int32 = 8,
    Float32 = 16,
    Float64 = 64,
};

/// Reads a single-file NIfTI-1 volume (`.nii` or gzip-compressed `.nii.gz`).
/// Intensities are scaled by scl_slope/scl_inter when the slope is nonzero.
VolumeHU read_nifti_volume(const std::filesystem::path& path);

/// Reads a NIfTI-1 label volume; any voxel > 0 becomes foreground.
MaskVolume read_nifti_mask(const std::filesystem::path& path);

/// Writes a NIfTI-1 volume. Compresses when the path ends in `.gz`.
/// Values are stored raw (slope 1, intercept 0) in the given datatype.
void write_nifti(const std::filesystem::path& path, const VolumeDims& dims,
                 const std::vector<float>& voxels, NiftiDatatype datatype);

void write_nifti_volume(const std::filesystem::path& path, const VolumeHU& volume,
                        NiftiDatatype datatype = NiftiDatatype::Float32);
void write_nifti_mask(const std::filesystem::path& path, const MaskVolume& mask);

/// Deterministic identifier: `{case_id}_slice{z:04}`.
std::string make_slice_id(const std::string& case_id, int z);

/// Every axial slice whose mask has at least one foreground voxel, ascending z.
std::vector<SlicePair> extract_nonempty_slices(const VolumeHU& image, const MaskVolume& mask);

/// Case id of a dataset file: the filename with `.nii` / `.nii.gz` removed.
std::string case_id_from_path(const std::filesystem::path& path);

/// Image/label file pairs from an MSD-style directory layout. Files are matched by
/// name, sorted lexicographically; hidden files (e.g. `._spleen_2.nii.gz`) are skipped.
struct CaseFiles {
    std::string case_id;
    std::filesystem::path image;
    std::filesystem::path label;
};
std::vector<CaseFiles> list_cases(const std::filesystem::path& images_dir,
                                  const std::filesystem::path& labels_dir);

}  // namespace segaudit
