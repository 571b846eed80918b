#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rsdflow/conv.hpp"
#include "rsdflow/grid.hpp"
#include "rsdflow/mask.hpp"
#include "rsdflow/photometric.hpp"
#include "rsdflow/warp.hpp"

namespace rsdflow {

/// Settings of the fixed (never trained) feature extractor.
struct ExtractorSettings {
    std::size_t scale = 8;      // output is 1/scale of the frame
    std::size_t channels = 16;  // per-frame feature channels
    std::uint64_t seed = 20210917;
};

/// Per-frame features at 1/scale resolution.
struct FeatureStack {
    Grid grid;
};

/// Channels: box-downsampled intensity per frame channel, horizontal and
/// vertical central differences of the downsampled grey level, then tanh of a
/// seeded bank of random 3x3 convolutions over those until `channels` is
/// reached. Frame sides must be multiples of the scale.
FeatureStack extract_features(const Grid& frame, const ExtractorSettings& settings);

struct MotionShape {
    std::size_t in_channels = 32;   // concatenated features of both frames
    std::size_t mid_channels = 16;
    std::size_t scale = 8;
};

/// Two-convolution flow model: w1 is 1x1 (in -> mid), w2 is 3x3 (mid -> 2).
struct MotionParams {
    ConvKernel w1;
    ConvKernel w2;
    std::size_t scale = 8;

    /// All weights and biases zero, so the predicted flow is zero.
    static MotionParams zeros(const MotionShape& shape);

    std::size_t parameter_count() const { return w1.parameter_count() + w2.parameter_count(); }
    /// Flat order: w1 weights, w1 bias, w2 weights, w2 bias.
    std::vector<double> to_vector() const;
    void assign(std::span<const double> flat);
    MotionParams zeros_like() const;
};

/// Forward activations kept for the backward pass.
struct MotionForward {
    Grid input;   // concat(current, previous) features
    Grid hidden;  // w1 * input
    Grid coarse;  // w2 * hidden (2 channels)
    FlowField flow;
};

MotionForward motion_forward(const MotionParams& params, const FeatureStack& current,
                             const FeatureStack& previous);

/// upsample(w2 * (w1 * concat(current, previous)))
FlowField predict_flow(const MotionParams& params, const FeatureStack& current,
                       const FeatureStack& previous);

/// One (current, previous) training pair with the object mask of the
/// current frame.
struct PairSample {
    const Grid* current = nullptr;
    const Grid* previous = nullptr;
    const FeatureStack* current_features = nullptr;
    const FeatureStack* previous_features = nullptr;
    const BinaryMask* mask = nullptr;
};

struct MotionEvaluation {
    double loss = 0.0;
    bool empty_mask = false;
    MotionParams grad;
    double grad_norm_sq = 0.0;
    /// grad_norm_sq == 0: the relaxed steepest-descent step is undefined here.
    bool zero_gradient = false;
};

/// Loss of warp(previous, predict_flow) against current under the padded
/// bounding box of the mask, with its exact gradient over every parameter.
MotionEvaluation loss_and_gradient(const MotionParams& params, const PairSample& pair,
                                   const PhotometricConfig& config);

}  // namespace rsdflow
