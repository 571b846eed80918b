#include "rsdflow/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>

#include "rsdflow/errors.hpp"

namespace rsdflow {

namespace {

struct RawImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;
};

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
    if (!f) throw FormatError("cannot open " + path.string());
    return f;
}

std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

// expand_palette: true -> RGB, false -> raw palette indices.
RawImage read_png_raw(const std::filesystem::path& path, bool expand_palette) {
    FilePtr file = open_file(path, "rb");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw FormatError(path.string() + " is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng initialisation failed");
    }
    RawImage img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE && expand_palette) png_set_palette_to_rgb(png);
    if (depth < 8) {
        if (color == PNG_COLOR_TYPE_GRAY) png_set_expand_gray_1_2_4_to_8(png);
        else if (color == PNG_COLOR_TYPE_PALETTE) png_set_packing(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    img.pixels.resize(stride * img.height);
    rows.resize(img.height);
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    if (stride != img.width * img.channels) throw FormatError("unsupported PNG layout: " + path.string());
    return img;
}

void skip_pnm_space(std::istream& is) {
    while (true) {
        const int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            return;
        }
    }
}

RawImage read_pnm_raw(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    std::string magic(2, '\0');
    is.read(magic.data(), 2);
    if (magic != "P5" && magic != "P6") throw FormatError(path.string() + " is not a binary PGM/PPM");
    RawImage img;
    img.channels = magic == "P6" ? 3 : 1;
    std::size_t maxval = 0;
    skip_pnm_space(is);
    is >> img.width;
    skip_pnm_space(is);
    is >> img.height;
    skip_pnm_space(is);
    is >> maxval;
    is.get();
    if (!is || maxval == 0 || maxval > 255 || img.width == 0 || img.height == 0) {
        throw FormatError("bad PNM header in " + path.string());
    }
    img.pixels.resize(img.width * img.height * img.channels);
    is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (is.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw FormatError("truncated PNM data in " + path.string());
    }
    if (maxval != 255) {
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
    }
    return img;
}

RawImage read_raw(const std::filesystem::path& path, bool expand_palette) {
    const std::string ext = lower_extension(path);
    if (ext == ".png") return read_png_raw(path, expand_palette);
    if (ext == ".ppm" || ext == ".pgm") return read_pnm_raw(path);
    throw FormatError("unsupported image format: " + path.string());
}

void write_png_raw(const RawImage& img, const std::filesystem::path& path) {
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + y * img.width * img.channels));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

Grid read_image(const std::filesystem::path& path) {
    const RawImage raw = read_raw(path, true);
    Grid g(raw.height, raw.width, raw.channels);
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) g.data()[i] = raw.pixels[i] / 255.0;
    return g;
}

void write_png(const Grid& image, const std::filesystem::path& path) {
    if (image.channels() != 1 && image.channels() != 3) {
        throw DimensionError("write_png needs 1 or 3 channels, got " + image.shape_string());
    }
    RawImage raw{image.height(), image.width(), image.channels(), std::vector<std::uint8_t>(image.size())};
    for (std::size_t i = 0; i < image.size(); ++i) {
        raw.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.data()[i], 0.0, 1.0) * 255.0));
    }
    write_png_raw(raw, path);
}

LabelImage read_label_image(const std::filesystem::path& path) {
    const RawImage raw = read_raw(path, false);
    if (raw.channels != 1) throw FormatError("mask must be grey or paletted: " + path.string());
    LabelImage l{raw.height, raw.width, std::vector<int>(raw.pixels.begin(), raw.pixels.end())};
    return l;
}

void write_label_png(const LabelImage& labels, const std::filesystem::path& path) {
    RawImage raw{labels.height, labels.width, 1, std::vector<std::uint8_t>(labels.labels.size())};
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        raw.pixels[i] = static_cast<std::uint8_t>(std::clamp(labels.labels[i], 0, 255));
    }
    write_png_raw(raw, path);
}

void write_mask_png(const BinaryMask& mask, const std::filesystem::path& path) {
    RawImage raw{mask.height(), mask.width(), 1, std::vector<std::uint8_t>(mask.height() * mask.width())};
    for (std::size_t y = 0; y < mask.height(); ++y)
        for (std::size_t x = 0; x < mask.width(); ++x) raw.pixels[y * mask.width() + x] = mask.at(y, x) ? 255 : 0;
    write_png_raw(raw, path);
}

namespace {

constexpr float kFloMagic = 202021.25f;

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_le32(std::span<const std::uint8_t> b, std::size_t at) {
    return std::uint32_t{b[at]} | std::uint32_t{b[at + 1]} << 8 | std::uint32_t{b[at + 2]} << 16 |
           std::uint32_t{b[at + 3]} << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_flo(const FlowField& flow) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + flow.height() * flow.width() * 8);
    put_le32(out, std::bit_cast<std::uint32_t>(kFloMagic));
    put_le32(out, static_cast<std::uint32_t>(flow.width()));
    put_le32(out, static_cast<std::uint32_t>(flow.height()));
    for (std::size_t y = 0; y < flow.height(); ++y)
        for (std::size_t x = 0; x < flow.width(); ++x) {
            put_le32(out, std::bit_cast<std::uint32_t>(static_cast<float>(flow.du(y, x))));
            put_le32(out, std::bit_cast<std::uint32_t>(static_cast<float>(flow.dv(y, x))));
        }
    return out;
}

FlowField decode_flo(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12) throw FormatError("flo: file shorter than its header");
    if (std::bit_cast<float>(get_le32(bytes, 0)) != kFloMagic) throw FormatError("flo: bad magic tag");
    const auto width = static_cast<std::int32_t>(get_le32(bytes, 4));
    const auto height = static_cast<std::int32_t>(get_le32(bytes, 8));
    if (width <= 0 || height <= 0 || width > (1 << 15) || height > (1 << 15)) {
        throw FormatError("flo: implausible size " + std::to_string(width) + "x" + std::to_string(height));
    }
    const std::size_t need = 12 + static_cast<std::size_t>(width) * height * 8;
    if (bytes.size() < need) throw FormatError("flo: truncated data");
    if (bytes.size() > need) throw FormatError("flo: trailing bytes");
    FlowField f(static_cast<std::size_t>(height), static_cast<std::size_t>(width));
    std::size_t at = 12;
    for (std::size_t y = 0; y < f.height(); ++y)
        for (std::size_t x = 0; x < f.width(); ++x) {
            f.du(y, x) = std::bit_cast<float>(get_le32(bytes, at));
            f.dv(y, x) = std::bit_cast<float>(get_le32(bytes, at + 4));
            at += 8;
        }
    return f;
}

void write_flo(const FlowField& flow, const std::filesystem::path& path) {
    if (!all_finite(flow.grid())) throw ArgumentError("flo: flow contains non-finite values");
    const auto bytes = encode_flo(flow);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FlowField read_flo(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_flo(bytes);
}

Grid colorize_flow(const FlowField& flow) {
    double max_mag = 0.0;
    for (std::size_t y = 0; y < flow.height(); ++y)
        for (std::size_t x = 0; x < flow.width(); ++x)
            max_mag = std::max(max_mag, std::hypot(flow.du(y, x), flow.dv(y, x)));

    Grid rgb(flow.height(), flow.width(), 3, 1.0);
    if (max_mag == 0.0) return rgb;
    for (std::size_t y = 0; y < flow.height(); ++y)
        for (std::size_t x = 0; x < flow.width(); ++x) {
            const double s = std::hypot(flow.du(y, x), flow.dv(y, x)) / max_mag;
            double hue = std::atan2(flow.dv(y, x), flow.du(y, x)) * 180.0 / std::numbers::pi;
            if (hue < 0.0) hue += 360.0;
            // HSV -> RGB with V = 1.
            const double h6 = hue / 60.0;
            const int sector = static_cast<int>(std::floor(h6)) % 6;
            const double f = h6 - std::floor(h6);
            const double p = 1.0 - s, q = 1.0 - s * f, t = 1.0 - s * (1.0 - f);
            double r = 1, g = 1, b = 1;
            switch (sector) {
                case 0: r = 1; g = t; b = p; break;
                case 1: r = q; g = 1; b = p; break;
                case 2: r = p; g = 1; b = t; break;
                case 3: r = p; g = q; b = 1; break;
                case 4: r = t; g = p; b = 1; break;
                default: r = 1; g = p; b = q; break;
            }
            rgb.at(y, x, 0) = r;
            rgb.at(y, x, 1) = g;
            rgb.at(y, x, 2) = b;
        }
    return rgb;
}

double rgb_hue(double r, double g, double b) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    if (d == 0.0) return std::numeric_limits<double>::quiet_NaN();
    double h = 0.0;
    if (mx == r) h = std::fmod((g - b) / d, 6.0);
    else if (mx == g) h = (b - r) / d + 2.0;
    else h = (r - g) / d + 4.0;
    h *= 60.0;
    if (h < 0.0) h += 360.0;
    return h;
}

}  // namespace rsdflow
