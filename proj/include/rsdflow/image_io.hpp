#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rsdflow/grid.hpp"
#include "rsdflow/mask.hpp"
#include "rsdflow/sequence.hpp"
#include "rsdflow/warp.hpp"

namespace rsdflow {

/// 8-bit PNG (grey, grey+alpha, RGB, RGBA, paletted) or binary PGM/PPM,
/// scaled to [0, 1]. Alpha is dropped, palettes expanded to RGB.
Grid read_image(const std::filesystem::path& path);

/// 1-channel grids are written grey, 3-channel RGB. Values are clamped to
/// [0, 1] and rounded to 8 bits.
void write_png(const Grid& image, const std::filesystem::path& path);

/// Object indices from a grey or paletted PNG (raw index, no palette
/// expansion) or a PGM.
LabelImage read_label_image(const std::filesystem::path& path);
void write_label_png(const LabelImage& labels, const std::filesystem::path& path);
void write_mask_png(const BinaryMask& mask, const std::filesystem::path& path);

/// Middlebury .flo: float 202021.25 ("PIEH"), int32 width, int32 height,
/// then row-major interleaved (du, dv) float32, all little-endian.
std::vector<std::uint8_t> encode_flo(const FlowField& flow);
FlowField decode_flo(std::span<const std::uint8_t> bytes);
void write_flo(const FlowField& flow, const std::filesystem::path& path);
FlowField read_flo(const std::filesystem::path& path);

/// HSV colour coding: hue = flow direction, saturation = magnitude over the
/// largest magnitude in the frame, value = 1. Zero flow is white.
Grid colorize_flow(const FlowField& flow);

/// Hue in degrees [0, 360) of an RGB pixel (NaN for grey).
double rgb_hue(double r, double g, double b);

}  // namespace rsdflow
