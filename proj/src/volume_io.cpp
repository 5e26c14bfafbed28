#include "segaudit/volume_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace segaudit {
namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kMagicOffset = 344;
constexpr std::size_t kDimOffset = 40;
constexpr std::size_t kDatatypeOffset = 70;
constexpr std::size_t kBitpixOffset = 72;
constexpr std::size_t kPixdimOffset = 76;
constexpr std::size_t kVoxOffsetOffset = 108;
constexpr std::size_t kSlopeOffset = 112;
constexpr std::size_t kInterOffset = 116;

struct GzCloser {
    void operator()(gzFile f) const noexcept { gzclose(f); }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

GzHandle open_gz(const std::filesystem::path& path, const char* mode) {
    gzFile f = gzopen(path.c_str(), mode);
    if (f == nullptr) throw IoError("cannot open " + path.string());
    return GzHandle(f);
}

// Reads up to `n` bytes; returns the number actually read.
std::size_t gz_read(gzFile f, void* dst, std::size_t n) {
    auto* out = static_cast<unsigned char*>(dst);
    std::size_t total = 0;
    while (total < n) {
        const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n - total, 1u << 30));
        const int got = gzread(f, out + total, chunk);
        if (got < 0) {
            int err = 0;
            throw CorruptionError(std::string("decompression failed: ") + gzerror(f, &err));
        }
        if (got == 0) break;
        total += static_cast<std::size_t>(got);
    }
    return total;
}

class HeaderView {
public:
    explicit HeaderView(const std::array<unsigned char, kHeaderSize>& bytes) : bytes_(bytes) {
        std::int32_t sizeof_hdr = 0;
        std::memcpy(&sizeof_hdr, bytes_.data(), 4);
        if (sizeof_hdr == 348) {
            swap_ = false;
        } else if (__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == 348u) {
            swap_ = true;
        } else {
            swap_ = false;  // leave it to the magic check
        }
    }

    template <typename T>
    T get(std::size_t offset) const {
        std::array<unsigned char, sizeof(T)> raw{};
        std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
        if (swap_) std::reverse(raw.begin(), raw.end());
        return std::bit_cast<T>(raw);
    }

    bool swapped() const noexcept { return swap_; }

private:
    const std::array<unsigned char, kHeaderSize>& bytes_;
    bool swap_ = false;
};

struct RawVolume {
    VolumeDims dims;
    std::vector<double> values;  // raw stored values, before scaling
    double slope = 0.0;
    double inter = 0.0;
};

std::size_t datatype_size(std::int16_t code) {
    switch (static_cast<NiftiDatatype>(code)) {
        case NiftiDatatype::UInt8: return 1;
        case NiftiDatatype::Int16: return 2;
        case NiftiDatatype::Int32: return 4;
        case NiftiDatatype::Float32: return 4;
        case NiftiDatatype::Float64: return 8;
    }
    return 0;
}

template <typename T>
void decode(const std::vector<unsigned char>& payload, bool swap, std::vector<double>& out) {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::array<unsigned char, sizeof(T)> raw{};
        std::memcpy(raw.data(), payload.data() + i * sizeof(T), sizeof(T));
        if (swap) std::reverse(raw.begin(), raw.end());
        out[i] = static_cast<double>(std::bit_cast<T>(raw));
    }
}

RawVolume read_raw(const std::filesystem::path& path) {
    auto file = open_gz(path, "rb");
    std::array<unsigned char, kHeaderSize> header{};
    if (gz_read(file.get(), header.data(), kHeaderSize) != kHeaderSize)
        throw FormatError(path.string() + ": file shorter than a NIfTI-1 header");
    if (std::memcmp(header.data() + kMagicOffset, "n+1\0", 4) != 0)
        throw FormatError(path.string() + ": missing NIfTI-1 magic \"n+1\"");

    HeaderView h(header);
    if (h.get<std::int32_t>(0) != 348) throw FormatError(path.string() + ": bad sizeof_hdr");

    std::array<std::int16_t, 8> dim{};
    for (std::size_t i = 0; i < 8; ++i) dim[i] = h.get<std::int16_t>(kDimOffset + 2 * i);
    if (dim[0] < 1 || dim[0] > 7) throw FormatError(path.string() + ": bad dim[0]");
    for (int i = 4; i <= dim[0]; ++i) {
        if (dim[i] > 1) throw UnsupportedError(path.string() + ": only 3-D volumes are supported");
    }

    RawVolume vol;
    vol.dims.width = dim[1];
    vol.dims.height = dim[0] >= 2 ? dim[2] : 1;
    vol.dims.depth = dim[0] >= 3 ? dim[3] : 1;
    if (vol.dims.width <= 0 || vol.dims.height <= 0 || vol.dims.depth <= 0)
        throw FormatError(path.string() + ": non-positive dimension");

    const auto datatype = h.get<std::int16_t>(kDatatypeOffset);
    const std::size_t elem = datatype_size(datatype);
    if (elem == 0) throw UnsupportedError(path.string() + ": unsupported datatype " + std::to_string(datatype));

    const float vox_offset = h.get<float>(kVoxOffsetOffset);
    if (!(vox_offset >= static_cast<float>(kHeaderSize)))
        throw FormatError(path.string() + ": vox_offset inside header");
    const auto data_start = static_cast<std::size_t>(vox_offset);

    // Skip the extension block (if any) between header and data.
    std::vector<unsigned char> skip(data_start - kHeaderSize);
    if (gz_read(file.get(), skip.data(), skip.size()) != skip.size())
        throw CorruptionError(path.string() + ": truncated before voxel data");

    const std::size_t count = vol.dims.voxel_count();
    std::vector<unsigned char> payload(count * elem);
    if (gz_read(file.get(), payload.data(), payload.size()) != payload.size())
        throw CorruptionError(path.string() + ": truncated voxel payload");

    vol.values.resize(count);
    switch (static_cast<NiftiDatatype>(datatype)) {
        case NiftiDatatype::UInt8: decode<std::uint8_t>(payload, h.swapped(), vol.values); break;
        case NiftiDatatype::Int16: decode<std::int16_t>(payload, h.swapped(), vol.values); break;
        case NiftiDatatype::Int32: decode<std::int32_t>(payload, h.swapped(), vol.values); break;
        case NiftiDatatype::Float32: decode<float>(payload, h.swapped(), vol.values); break;
        case NiftiDatatype::Float64: decode<double>(payload, h.swapped(), vol.values); break;
    }

    const float slope = h.get<float>(kSlopeOffset);
    const float inter = h.get<float>(kInterOffset);
    vol.slope = std::isfinite(slope) ? slope : 0.0;
    vol.inter = std::isfinite(inter) ? inter : 0.0;
    return vol;
}

template <typename T>
void put(std::array<unsigned char, kHeaderSize>& header, std::size_t offset, T value) {
    std::memcpy(header.data() + offset, &value, sizeof(T));
}

template <typename T>
void encode(const std::vector<float>& voxels, std::vector<unsigned char>& out) {
    out.resize(voxels.size() * sizeof(T));
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        const T v = static_cast<T>(voxels[i]);
        std::memcpy(out.data() + i * sizeof(T), &v, sizeof(T));
    }
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

HuSlice VolumeHU::slice(int z) const {
    HuSlice out(dims.width, dims.height);
    const auto begin = voxels.begin() + static_cast<std::ptrdiff_t>(dims.slice_size() * z);
    std::copy(begin, begin + static_cast<std::ptrdiff_t>(dims.slice_size()), out.pixels.begin());
    return out;
}

MaskSlice MaskVolume::slice(int z) const {
    MaskSlice out(dims.width, dims.height);
    const auto begin = voxels.begin() + static_cast<std::ptrdiff_t>(dims.slice_size() * z);
    std::copy(begin, begin + static_cast<std::ptrdiff_t>(dims.slice_size()), out.pixels.begin());
    return out;
}

VolumeHU read_nifti_volume(const std::filesystem::path& path) {
    RawVolume raw = read_raw(path);
    VolumeHU vol;
    vol.case_id = case_id_from_path(path);
    vol.dims = raw.dims;
    vol.voxels.resize(raw.values.size());
    const bool scaled = raw.slope != 0.0;
    for (std::size_t i = 0; i < raw.values.size(); ++i) {
        const double v = scaled ? raw.values[i] * raw.slope + raw.inter : raw.values[i];
        vol.voxels[i] = static_cast<float>(v);
    }
    return vol;
}

MaskVolume read_nifti_mask(const std::filesystem::path& path) {
    RawVolume raw = read_raw(path);
    MaskVolume mask;
    mask.case_id = case_id_from_path(path);
    mask.dims = raw.dims;
    mask.voxels.resize(raw.values.size());
    for (std::size_t i = 0; i < raw.values.size(); ++i) mask.voxels[i] = raw.values[i] > 0.0 ? 1 : 0;
    return mask;
}

void write_nifti(const std::filesystem::path& path, const VolumeDims& dims, const std::vector<float>& voxels,
                 NiftiDatatype datatype) {
    if (dims.width <= 0 || dims.height <= 0 || dims.depth <= 0)
        throw DimensionError("write_nifti: non-positive dimension");
    if (voxels.size() != dims.voxel_count()) throw DimensionError("write_nifti: voxel count does not match dims");
    if (dims.width > 32767 || dims.height > 32767 || dims.depth > 32767)
        throw UnsupportedError("write_nifti: dimension exceeds NIfTI-1 limits");

    std::array<unsigned char, kHeaderSize> header{};
    put<std::int32_t>(header, 0, 348);
    const std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(dims.width),
                                          static_cast<std::int16_t>(dims.height),
                                          static_cast<std::int16_t>(dims.depth), 1, 1, 1, 1};
    for (std::size_t i = 0; i < 8; ++i) put<std::int16_t>(header, kDimOffset + 2 * i, dim[i]);
    put<std::int16_t>(header, kDatatypeOffset, static_cast<std::int16_t>(datatype));
    put<std::int16_t>(header, kBitpixOffset,
                      static_cast<std::int16_t>(8 * datatype_size(static_cast<std::int16_t>(datatype))));
    for (std::size_t i = 0; i < 8; ++i) put<float>(header, kPixdimOffset + 4 * i, 1.0f);
    put<float>(header, kVoxOffsetOffset, 352.0f);
    put<float>(header, kSlopeOffset, 1.0f);
    put<float>(header, kInterOffset, 0.0f);
    std::memcpy(header.data() + kMagicOffset, "n+1\0", 4);

    std::vector<unsigned char> payload;
    switch (datatype) {
        case NiftiDatatype::UInt8: encode<std::uint8_t>(voxels, payload); break;
        case NiftiDatatype::Int16: encode<std::int16_t>(voxels, payload); break;
        case NiftiDatatype::Int32: encode<std::int32_t>(voxels, payload); break;
        case NiftiDatatype::Float32: encode<float>(voxels, payload); break;
        case NiftiDatatype::Float64: encode<double>(voxels, payload); break;
    }

    const bool gz = has_suffix(path.string(), ".gz");
    auto file = open_gz(path, gz ? "wb6" : "wbT");
    const std::array<unsigned char, 4> extension{};  // no extensions
    auto write_all = [&](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        while (n > 0) {
            const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
            if (gzwrite(file.get(), p, chunk) != static_cast<int>(chunk))
                throw IoError("write failed: " + path.string());
            p += chunk;
            n -= chunk;
        }
    };
    write_all(header.data(), header.size());
    write_all(extension.data(), extension.size());
    write_all(payload.data(), payload.size());
    if (gzclose(file.release()) != Z_OK) throw IoError("close failed: " + path.string());
}

void write_nifti_volume(const std::filesystem::path& path, const VolumeHU& volume, NiftiDatatype datatype) {
    write_nifti(path, volume.dims, volume.voxels, datatype);
}

void write_nifti_mask(const std::filesystem::path& path, const MaskVolume& mask) {
    std::vector<float> values(mask.voxels.begin(), mask.voxels.end());
    write_nifti(path, mask.dims, values, NiftiDatatype::UInt8);
}

std::string make_slice_id(const std::string& case_id, int z) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", z);
    return case_id + "_slice" + buf;
}

std::vector<SlicePair> extract_nonempty_slices(const VolumeHU& image, const MaskVolume& mask) {
    if (image.dims != mask.dims)
        throw DimensionError("image and mask dimensions differ for case " + image.case_id);
    if (image.voxels.size() != image.dims.voxel_count() || mask.voxels.size() != mask.dims.voxel_count())
        throw DimensionError("voxel buffer does not match dims for case " + image.case_id);

    std::vector<SlicePair> out;
    const std::size_t plane = image.dims.slice_size();
    for (int z = 0; z < image.dims.depth; ++z) {
        const auto first = mask.voxels.begin() + static_cast<std::ptrdiff_t>(plane * z);
        if (std::none_of(first, first + static_cast<std::ptrdiff_t>(plane), [](auto v) { return v != 0; }))
            continue;
        SlicePair pair;
        pair.case_id = image.case_id;
        pair.z_index = z;
        pair.slice_id = make_slice_id(image.case_id, z);
        pair.hu = image.slice(z);
        pair.gt = mask.slice(z);
        out.push_back(std::move(pair));
    }
    return out;
}

std::string case_id_from_path(const std::filesystem::path& path) {
    std::string name = path.filename().string();
    for (const char* suffix : {".nii.gz", ".nii"}) {
        if (has_suffix(name, suffix)) return name.substr(0, name.size() - std::strlen(suffix));
    }
    return path.stem().string();
}

std::vector<CaseFiles> list_cases(const std::filesystem::path& images_dir, const std::filesystem::path& labels_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(images_dir)) throw IoError("not a directory: " + images_dir.string());
    if (!fs::is_directory(labels_dir)) throw IoError("not a directory: " + labels_dir.string());

    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.empty() || name.front() == '.') continue;
        if (!has_suffix(name, ".nii") && !has_suffix(name, ".nii.gz")) continue;
        images.push_back(entry.path());
    }
    std::sort(images.begin(), images.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

    std::vector<CaseFiles> cases;
    for (const auto& image : images) {
        const fs::path label = labels_dir / image.filename();
        if (!fs::exists(label)) throw IoError("no label file for " + image.filename().string());
        cases.push_back({case_id_from_path(image), image, label});
    }
    return cases;
}

}  // namespace segaudit
