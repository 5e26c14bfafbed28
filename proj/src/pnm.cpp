#include "segaudit/pnm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

namespace segaudit {
namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::string& header, const unsigned char* data,
                std::size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw IoError("write failed: " + path.string());
}

struct PnmHeader {
    int width = 0;
    int height = 0;
    std::size_t data_offset = 0;
};

// Parses "P5|P6 <ws> width <ws> height <ws> maxval <one ws>", allowing '#' comments
// between tokens.
PnmHeader parse_header(const std::string& bytes, const char* magic, const std::filesystem::path& path) {
    if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0)
        throw FormatError(path.string() + ": expected " + magic + " netpbm header");
    std::size_t pos = 2;
    auto next_token = [&]() -> long {
        for (;;) {
            if (pos >= bytes.size()) throw FormatError(path.string() + ": truncated header");
            const auto c = static_cast<unsigned char>(bytes[pos]);
            if (std::isspace(c)) {
                ++pos;
            } else if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        if (!std::isdigit(static_cast<unsigned char>(bytes[pos])))
            throw FormatError(path.string() + ": malformed header token");
        long v = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000'000) throw FormatError(path.string() + ": header value out of range");
            ++pos;
        }
        return v;
    };
    const long w = next_token();
    const long h = next_token();
    const long maxval = next_token();
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw FormatError(path.string() + ": missing whitespace after maxval");
    ++pos;
    if (w <= 0 || h <= 0) throw FormatError(path.string() + ": non-positive dimensions");
    if (maxval != 255) throw UnsupportedError(path.string() + ": only maxval 255 is supported");
    return {static_cast<int>(w), static_cast<int>(h), pos};
}

std::string make_header(const char* magic, int w, int h) {
    return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Gray8Slice& image) {
    write_file(path, make_header("P5", image.width, image.height), image.pixels.data(), image.pixels.size());
}

Gray8Slice read_pgm(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const PnmHeader hdr = parse_header(bytes, "P5", path);
    Gray8Slice out(hdr.width, hdr.height);
    if (bytes.size() - hdr.data_offset < out.size()) throw CorruptionError(path.string() + ": truncated pixel data");
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(hdr.data_offset), out.size(), out.pixels.begin());
    return out;
}

void write_ppm(const std::filesystem::path& path, const Rgb8Slice& image) {
    std::vector<unsigned char> data;
    data.reserve(image.size() * 3);
    for (const Rgb8& p : image.pixels) {
        data.push_back(p.r);
        data.push_back(p.g);
        data.push_back(p.b);
    }
    write_file(path, make_header("P6", image.width, image.height), data.data(), data.size());
}

Rgb8Slice read_ppm(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const PnmHeader hdr = parse_header(bytes, "P6", path);
    Rgb8Slice out(hdr.width, hdr.height);
    if (bytes.size() - hdr.data_offset < out.size() * 3)
        throw CorruptionError(path.string() + ": truncated pixel data");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + hdr.data_offset;
    for (auto& px : out.pixels) {
        px = {p[0], p[1], p[2]};
        p += 3;
    }
    return out;
}

void write_mask_pgm(const std::filesystem::path& path, const MaskSlice& mask) {
    std::vector<unsigned char> data(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) data[i] = mask.pixels[i] ? 255 : 0;
    write_file(path, make_header("P5", mask.width, mask.height), data.data(), data.size());
}

MaskSlice read_mask_pgm(const std::filesystem::path& path) {
    const Gray8Slice gray = read_pgm(path);
    MaskSlice mask(gray.width, gray.height);
    for (std::size_t i = 0; i < gray.size(); ++i) {
        const auto v = gray.pixels[i];
        if (v != 0 && v != 255)
            throw FormatError(path.string() + ": mask value " + std::to_string(v) + " is not 0 or 255");
        mask.pixels[i] = v ? 1 : 0;
    }
    return mask;
}

}  // namespace segaudit
