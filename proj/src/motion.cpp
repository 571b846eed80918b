#include "rsdflow/motion.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "rsdflow/errors.hpp"

namespace rsdflow {

namespace {

Grid box_downsample(const Grid& frame, std::size_t s) {
    Grid out(frame.height() / s, frame.width() / s, frame.channels());
    const double inv = 1.0 / static_cast<double>(s * s);
    for (std::size_t y = 0; y < out.height(); ++y)
        for (std::size_t x = 0; x < out.width(); ++x)
            for (std::size_t c = 0; c < frame.channels(); ++c) {
                double acc = 0.0;
                for (std::size_t dy = 0; dy < s; ++dy)
                    for (std::size_t dx = 0; dx < s; ++dx) acc += frame.at(y * s + dy, x * s + dx, c);
                out.at(y, x, c) = acc * inv;
            }
    return out;
}

// Uniform in [-1, 1) from the raw 64-bit engine output; std distributions are
// not reproducible across standard libraries.
double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace

FeatureStack extract_features(const Grid& frame, const ExtractorSettings& settings) {
    const std::size_t s = settings.scale;
    if (s == 0) throw ArgumentError("extractor scale must be >= 1");
    if (frame.height() % s != 0 || frame.width() % s != 0) {
        throw DimensionError("frame " + frame.shape_string() + " is not divisible by scale " +
                             std::to_string(s));
    }
    const std::size_t base_channels = frame.channels() + 2;
    if (settings.channels < base_channels) {
        throw ArgumentError("extractor needs at least " + std::to_string(base_channels) + " channels");
    }

    const Grid small = box_downsample(frame, s);
    const std::size_t h = small.height(), w = small.width();
    Grid base(h, w, base_channels);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < frame.channels(); ++c) base.at(y, x, c) = small.at(y, x, c);
            auto grey = [&](std::size_t yy, std::size_t xx) {
                double g = 0.0;
                for (std::size_t c = 0; c < frame.channels(); ++c) g += small.at(yy, xx, c);
                return g / static_cast<double>(frame.channels());
            };
            const std::size_t xl = x > 0 ? x - 1 : 0, xr = std::min(w - 1, x + 1);
            const std::size_t yu = y > 0 ? y - 1 : 0, yd = std::min(h - 1, y + 1);
            base.at(y, x, frame.channels()) = 0.5 * (grey(y, xr) - grey(y, xl));
            base.at(y, x, frame.channels() + 1) = 0.5 * (grey(yd, x) - grey(yu, x));
        }
    }

    const std::size_t extra = settings.channels - base_channels;
    ConvKernel bank(base_channels, extra, 3, 3, true);
    std::mt19937_64 rng(settings.seed);
    const double fan = 1.0 / std::sqrt(static_cast<double>(base_channels * 9));
    for (double& v : bank.weights()) v = unit_uniform(rng) * fan;
    for (double& v : bank.bias()) v = unit_uniform(rng) * 0.1;
    const Grid random = conv2d(base, bank);

    FeatureStack f{Grid(h, w, settings.channels)};
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t c = 0; c < base_channels; ++c)
            f.grid.data()[p * settings.channels + c] = base.data()[p * base_channels + c];
        for (std::size_t c = 0; c < extra; ++c)
            f.grid.data()[p * settings.channels + base_channels + c] = std::tanh(random.data()[p * extra + c]);
    }
    return f;
}

MotionParams MotionParams::zeros(const MotionShape& shape) {
    if (shape.scale == 0) throw ArgumentError("motion scale must be >= 1");
    return {ConvKernel(shape.in_channels, shape.mid_channels, 1, 1, true),
            ConvKernel(shape.mid_channels, 2, 3, 3, true), shape.scale};
}

std::vector<double> MotionParams::to_vector() const {
    std::vector<double> v;
    v.reserve(parameter_count());
    v.insert(v.end(), w1.weights().begin(), w1.weights().end());
    v.insert(v.end(), w1.bias().begin(), w1.bias().end());
    v.insert(v.end(), w2.weights().begin(), w2.weights().end());
    v.insert(v.end(), w2.bias().begin(), w2.bias().end());
    return v;
}

void MotionParams::assign(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        throw DimensionError("motion params expect " + std::to_string(parameter_count()) +
                             " values, got " + std::to_string(flat.size()));
    }
    auto it = flat.begin();
    for (auto* part : {&w1.weights(), &w1.bias(), &w2.weights(), &w2.bias()}) {
        std::copy_n(it, part->size(), part->begin());
        it += static_cast<std::ptrdiff_t>(part->size());
    }
}

MotionParams MotionParams::zeros_like() const {
    return {w1.zeros_like(), w2.zeros_like(), scale};
}

MotionForward motion_forward(const MotionParams& params, const FeatureStack& current,
                             const FeatureStack& previous) {
    if (params.w2.out_channels() != 2) throw DimensionError("w2 must produce 2 channels");
    MotionForward fw;
    fw.input = concat_channels(current.grid, previous.grid);
    fw.hidden = conv2d(fw.input, params.w1);
    fw.coarse = conv2d(fw.hidden, params.w2);
    fw.flow = FlowField(bilinear_resize(fw.coarse, params.scale));
    return fw;
}

FlowField predict_flow(const MotionParams& params, const FeatureStack& current,
                       const FeatureStack& previous) {
    return motion_forward(params, current, previous).flow;
}

MotionEvaluation loss_and_gradient(const MotionParams& params, const PairSample& pair,
                                   const PhotometricConfig& config) {
    const MotionForward fw = motion_forward(params, *pair.current_features, *pair.previous_features);
    if (fw.flow.height() != pair.current->height() || fw.flow.width() != pair.current->width()) {
        throw DimensionError("predicted flow " + fw.flow.grid().shape_string() +
                             " does not match frame " + pair.current->shape_string());
    }
    const BinaryMask box = mask_to_bbox(*pair.mask, config.mask_pad);
    const Grid warped = warp(*pair.previous, fw.flow);
    const PhotometricEvaluation photo =
        photometric_loss_and_gradient(*pair.current, warped, box, config);

    MotionEvaluation ev;
    ev.loss = photo.loss.value;
    ev.empty_mask = photo.loss.empty_mask;
    if (ev.empty_mask) {
        ev.grad = params.zeros_like();
        ev.zero_gradient = true;
        return ev;
    }

    const WarpGradient wg = warp_backward(*pair.previous, fw.flow, photo.grad_warped);
    const Grid d_coarse =
        bilinear_resize_backward(wg.flow.grid(), fw.coarse.height(), fw.coarse.width(), params.scale);
    const ConvGradient g2 = conv2d_backward(fw.hidden, params.w2, d_coarse);
    const ConvGradient g1 = conv2d_backward(fw.input, params.w1, g2.input);
    ev.grad = {g1.kernel, g2.kernel, params.scale};

    for (double v : ev.grad.to_vector()) ev.grad_norm_sq += v * v;
    ev.zero_gradient = ev.grad_norm_sq == 0.0;
    return ev;
}

}  // namespace rsdflow
