#include "rsdflow/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <regex>
#include <set>
#include <string>

#include "rsdflow/errors.hpp"
#include "rsdflow/image_io.hpp"

namespace rsdflow {

BinaryMask SequenceBundle::object_mask(std::size_t object, std::size_t frame) const {
    if (!has_labels(frame)) throw ArgumentError("frame " + std::to_string(frame) + " has no mask");
    return labels[frame]->object(static_cast<int>(object));
}

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

bool is_image(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

// Files keyed by the last run of digits in the stem.
std::map<long, std::filesystem::path> numbered_images(const std::filesystem::path& dir) {
    std::map<long, std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    static const std::regex digits("(\\d+)(?!.*\\d)");
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !is_image(entry.path())) continue;
        const std::string stem = entry.path().stem().string();
        std::smatch m;
        if (!std::regex_search(stem, m, digits)) {
            throw FormatError("cannot order file without a frame number: " + entry.path().string());
        }
        const long n = std::stol(m[1].str());
        if (out.contains(n)) throw FormatError("duplicate frame number in " + entry.path().string());
        out[n] = entry.path();
    }
    return out;
}

}  // namespace

SequenceBundle load_sequence(const std::filesystem::path& dir) {
    const auto frames = numbered_images(dir / "frames");
    if (frames.empty()) throw FormatError("no frames found under " + (dir / "frames").string());
    const auto masks = numbered_images(dir / "masks");

    SequenceBundle b;
    std::set<int> objects;
    for (const auto& [number, path] : frames) {
        Grid frame = read_image(path);
        if (!b.frames.empty() && !frame.same_shape(b.frames.front())) {
            throw DimensionError("frame " + path.string() + " is " + frame.shape_string() +
                                 ", expected " + b.frames.front().shape_string());
        }
        std::optional<LabelImage> label;
        if (auto it = masks.find(number); it != masks.end()) {
            label = read_label_image(it->second);
            if (label->height != frame.height() || label->width != frame.width()) {
                throw DimensionError("mask " + it->second.string() + " does not match frame size");
            }
            for (int v : label->labels) {
                if (v < 0) throw FormatError("negative label in " + it->second.string());
                if (v > 0) objects.insert(v);
            }
        }
        b.frames.push_back(std::move(frame));
        b.labels.push_back(std::move(label));
    }
    if (!b.labels.front()) {
        throw FormatError("missing mask for the first frame (" + frames.begin()->second.filename().string() + ")");
    }
    b.object_count = objects.empty() ? 0 : static_cast<std::size_t>(*objects.rbegin());
    return b;
}

Grid smooth_texture(std::size_t height, std::size_t width, std::size_t channels, std::uint64_t seed,
                    double brightness) {
    std::mt19937_64 rng(seed);
    constexpr int kWaves = 4;
    Grid g(height, width, channels);
    for (std::size_t c = 0; c < channels; ++c) {
        struct Wave { double fx, fy, phase, amp; };
        Wave waves[kWaves];
        for (auto& w : waves) {
            const double wavelength = 10.0 + 14.0 * unit(rng);
            const double angle = 2.0 * std::numbers::pi * unit(rng);
            w.fx = std::cos(angle) / wavelength;
            w.fy = std::sin(angle) / wavelength;
            w.phase = 2.0 * std::numbers::pi * unit(rng);
            w.amp = 0.08 + 0.06 * unit(rng);
        }
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                double v = brightness;
                for (const auto& w : waves)
                    v += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
                g.at(y, x, c) = std::clamp(v, 0.0, 1.0);
            }
    }
    return g;
}

SyntheticSequence synthesize_sequence(const SyntheticSpec& spec) {
    if (spec.patch_height < 2 || spec.patch_width < 2) throw ArgumentError("patch must be at least 2x2");
    if (spec.patch_height > spec.height || spec.patch_width > spec.width) {
        throw ArgumentError("patch larger than the frame");
    }
    const double max_x = static_cast<double>(spec.width - spec.patch_width);
    const double max_y = static_cast<double>(spec.height - spec.patch_height);

    SyntheticSequence seq;
    Displacement pos{spec.start_x.value_or(max_x / 2.0), spec.start_y.value_or(max_y / 2.0)};
    seq.positions.push_back(pos);
    for (const auto& m : spec.motions) {
        pos.dx += m.dx;
        pos.dy += m.dy;
        seq.positions.push_back(pos);
    }
    for (std::size_t t = 0; t < seq.positions.size(); ++t) {
        const auto& p = seq.positions[t];
        if (p.dx < 0.0 || p.dy < 0.0 || p.dx > max_x || p.dy > max_y) {
            throw ArgumentError("patch leaves the frame at frame " + std::to_string(t));
        }
    }

    const Grid background = smooth_texture(spec.height, spec.width, spec.channels, spec.seed * 2 + 1, 0.35);
    seq.patch_texture = smooth_texture(spec.patch_height, spec.patch_width, spec.channels, spec.seed * 2 + 2, 0.65);
    const Grid occluder_texture = smooth_texture(spec.height, spec.width, spec.channels, spec.seed * 2 + 3, 0.15);

    auto occluded = [&](std::size_t y, std::size_t x) {
        if (!spec.occluder) return false;
        const auto& o = *spec.occluder;
        return y >= o.top && y < o.top + o.height && x >= o.left && x < o.left + o.width;
    };

    const double ph = static_cast<double>(spec.patch_height - 1);
    const double pw = static_cast<double>(spec.patch_width - 1);
    seq.bundle.object_count = 1;
    for (std::size_t t = 0; t < seq.positions.size(); ++t) {
        const auto& p = seq.positions[t];
        Grid frame = background;
        LabelImage label{spec.height, spec.width, std::vector<int>(spec.height * spec.width, 0)};
        FlowField gt(spec.height, spec.width);
        for (std::size_t y = 0; y < spec.height; ++y) {
            for (std::size_t x = 0; x < spec.width; ++x) {
                if (occluded(y, x)) {
                    for (std::size_t c = 0; c < spec.channels; ++c) frame.at(y, x, c) = occluder_texture.at(y, x, c);
                    continue;
                }
                const double ly = static_cast<double>(y) - p.dy;
                const double lx = static_cast<double>(x) - p.dx;
                if (ly < 0.0 || lx < 0.0 || ly > ph || lx > pw) continue;
                const auto y0 = static_cast<std::size_t>(std::floor(ly));
                const auto x0 = static_cast<std::size_t>(std::floor(lx));
                const std::size_t y1 = std::min(y0 + 1, spec.patch_height - 1);
                const std::size_t x1 = std::min(x0 + 1, spec.patch_width - 1);
                const double fy = ly - y0, fx = lx - x0;
                for (std::size_t c = 0; c < spec.channels; ++c) {
                    const auto& tex = seq.patch_texture;
                    frame.at(y, x, c) = (1 - fy) * ((1 - fx) * tex.at(y0, x0, c) + fx * tex.at(y0, x1, c)) +
                                        fy * ((1 - fx) * tex.at(y1, x0, c) + fx * tex.at(y1, x1, c));
                }
                label.labels[y * spec.width + x] = 1;
                if (t > 0) {
                    gt.du(y, x) = -spec.motions[t - 1].dx;
                    gt.dv(y, x) = -spec.motions[t - 1].dy;
                }
            }
        }
        seq.bundle.frames.push_back(std::move(frame));
        seq.bundle.labels.emplace_back(std::move(label));
        seq.gt_flows.push_back(std::move(gt));
    }
    return seq;
}

}  // namespace rsdflow
