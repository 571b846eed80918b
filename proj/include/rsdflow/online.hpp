#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "rsdflow/motion.hpp"
#include "rsdflow/rsd.hpp"

namespace rsdflow {

/// Ring buffer of the most recent frames and their features. Eviction is
/// oldest-first once `capacity` entries are held.
class FrameCache {
public:
    struct Entry {
        std::size_t index;
        Grid frame;
        FeatureStack features;
    };

    explicit FrameCache(std::size_t capacity);

    void put(std::size_t index, Grid frame, FeatureStack features);
    /// nullptr when the frame is not (or no longer) cached.
    const Entry* find(std::size_t index) const;
    /// Like find, but a miss throws InternalError.
    const Entry& at(std::size_t index) const;

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::deque<Entry> entries_;
};

/// Mean photometric loss over a batch of pairs, as a function of the flat
/// motion parameters.
class MotionObjective final : public Objective {
public:
    MotionObjective(MotionParams shape, std::vector<PairSample> pairs, PhotometricConfig config);

    std::size_t dimension() const override { return shape_.parameter_count(); }
    Evaluation evaluate(std::span<const double> params) const override;
    double value(std::span<const double> params) const override;

    FlowField flow(std::span<const double> params, std::size_t pair) const;

private:
    MotionParams unpack(std::span<const double> params) const;

    MotionParams shape_;
    std::vector<PairSample> pairs_;
    PhotometricConfig config_;
};

struct SessionConfig {
    MotionShape motion;
    ExtractorSettings extractor;
    PhotometricConfig photometric;
    OptimizerSpec optimizer;  // iterations are supplied per call
    /// Warm-start each optimisation from the previous parameters instead of
    /// fresh zeros.
    bool share_params = false;
};

struct EmittedFlow {
    std::size_t frame = 0;  // flow maps frame -> frame - 1
    FlowField flow;
    std::vector<double> losses;  // before each update and after the last
    std::vector<RsdStepRecord> rsd_steps;
    std::size_t update = 0;  // which optimisation produced this flow
};

struct StreamResult {
    std::vector<EmittedFlow> flows;
    std::size_t featurizations = 0;
    std::size_t updates = 0;
};

/// Per-frame online optimisation: for every t >= 1 the model is optimised on
/// (t, t-1) and the flow O_{t,t-1} emitted. masks[t] is the object mask of
/// frame t.
StreamResult run_streaming(const SessionConfig& session, std::span<const Grid> frames,
                           std::span<const BinaryMask> masks, std::size_t iterations);

/// Interval-batched optimisation: at every t > 0 with t % interval == 0 the
/// model is optimised jointly on the `interval` pairs ending at t and their
/// flows emitted in frame order. Pairs after the last multiple of the
/// interval are never emitted.
StreamResult run_batched(const SessionConfig& session, std::span<const Grid> frames,
                         std::span<const BinaryMask> masks, std::size_t interval,
                         std::size_t iterations);

}  // namespace rsdflow
