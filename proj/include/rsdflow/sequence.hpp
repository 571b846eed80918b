#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "rsdflow/grid.hpp"
#include "rsdflow/mask.hpp"
#include "rsdflow/warp.hpp"

namespace rsdflow {

/// Object-index image, 0 = background.
struct LabelImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<int> labels;

    BinaryMask object(int label) const { return BinaryMask::from_labels(labels, height, width, label); }
    friend bool operator==(const LabelImage&, const LabelImage&) = default;
};

struct SequenceBundle {
    std::vector<Grid> frames;                     // intensities in [0, 1]
    std::vector<std::optional<LabelImage>> labels;  // one slot per frame; frame 0 always set
    std::size_t object_count = 0;

    bool has_labels(std::size_t frame) const {
        return frame < labels.size() && labels[frame].has_value();
    }
    /// Mask of object `object` (1-based) in `frame`; throws if unlabelled.
    BinaryMask object_mask(std::size_t object, std::size_t frame) const;
};

/// Reads `<dir>/frames/*` and `<dir>/masks/*` (PNG, PPM or PGM), ordered by
/// the number in each file name. A mask is matched to the frame with the same
/// number; the mask of the first frame is required.
SequenceBundle load_sequence(const std::filesystem::path& dir);

struct Displacement {
    double dx = 0.0;
    double dy = 0.0;
};

struct Occluder {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t height = 0;
    std::size_t width = 0;
};

struct SyntheticSpec {
    std::uint64_t seed = 1;
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t channels = 3;
    std::size_t patch_height = 28;
    std::size_t patch_width = 28;
    /// Top-left of the patch in frame 0; unset = centred.
    std::optional<double> start_x;
    std::optional<double> start_y;
    /// Patch displacement from frame t-1 to frame t, one entry per t >= 1.
    std::vector<Displacement> motions;
    std::optional<Occluder> occluder;
};

struct SyntheticSequence {
    SequenceBundle bundle;
    /// gt_flows[t] maps frame t to frame t-1 (gt_flows[0] is zero). Inside
    /// the visible patch it equals minus that frame's displacement, since
    /// backward warping samples the previous frame where the pixel came from.
    std::vector<FlowField> gt_flows;
    /// Patch texture (patch_height x patch_width) for interpolation oracles.
    Grid patch_texture;
    std::vector<Displacement> positions;  // patch top-left per frame
};

/// Textured patch over a textured background, placed per frame with bilinear
/// sub-pixel sampling, plus an optional static occluder drawn on top. Throws
/// ArgumentError when the patch would leave the frame.
SyntheticSequence synthesize_sequence(const SyntheticSpec& spec);

/// Smooth random texture in [0, 1] from a few seeded sinusoids per channel.
Grid smooth_texture(std::size_t height, std::size_t width, std::size_t channels, std::uint64_t seed,
                    double brightness);

}  // namespace rsdflow
