#include "rsdflow/online.hpp"

#include <string>

#include "rsdflow/errors.hpp"

namespace rsdflow {

FrameCache::FrameCache(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ArgumentError("frame cache capacity must be >= 1");
}

void FrameCache::put(std::size_t index, Grid frame, FeatureStack features) {
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back({index, std::move(frame), std::move(features)});
}

const FrameCache::Entry* FrameCache::find(std::size_t index) const {
    for (const auto& e : entries_)
        if (e.index == index) return &e;
    return nullptr;
}

const FrameCache::Entry& FrameCache::at(std::size_t index) const {
    const Entry* e = find(index);
    if (e == nullptr) throw InternalError("frame cache miss for frame " + std::to_string(index));
    return *e;
}

MotionObjective::MotionObjective(MotionParams shape, std::vector<PairSample> pairs,
                                 PhotometricConfig config)
    : shape_(std::move(shape)), pairs_(std::move(pairs)), config_(config) {
    if (pairs_.empty()) throw ArgumentError("motion objective needs at least one pair");
}

MotionParams MotionObjective::unpack(std::span<const double> params) const {
    MotionParams p = shape_;
    p.assign(params);
    return p;
}

Evaluation MotionObjective::evaluate(std::span<const double> params) const {
    const MotionParams p = unpack(params);
    Evaluation out{0.0, std::vector<double>(params.size(), 0.0)};
    // Fixed pair order keeps the reduction deterministic.
    for (const auto& pair : pairs_) {
        const MotionEvaluation ev = loss_and_gradient(p, pair, config_);
        out.loss += ev.loss;
        const std::vector<double> g = ev.grad.to_vector();
        for (std::size_t i = 0; i < g.size(); ++i) out.gradient[i] += g[i];
    }
    const double inv = 1.0 / static_cast<double>(pairs_.size());
    out.loss *= inv;
    for (double& g : out.gradient) g *= inv;
    return out;
}

double MotionObjective::value(std::span<const double> params) const {
    const MotionParams p = unpack(params);
    double total = 0.0;
    for (const auto& pair : pairs_) {
        const FlowField flow = predict_flow(p, *pair.current_features, *pair.previous_features);
        const Grid warped = warp(*pair.previous, flow);
        total += masked_photometric_loss(*pair.current, warped,
                                         mask_to_bbox(*pair.mask, config_.mask_pad), config_)
                     .value;
    }
    return total / static_cast<double>(pairs_.size());
}

FlowField MotionObjective::flow(std::span<const double> params, std::size_t pair) const {
    const auto& ps = pairs_.at(pair);
    return predict_flow(unpack(params), *ps.current_features, *ps.previous_features);
}

namespace {

void check_inputs(std::span<const Grid> frames, std::span<const BinaryMask> masks) {
    if (frames.size() < 2) throw ArgumentError("online optimisation needs at least 2 frames");
    if (masks.size() != frames.size()) {
        throw DimensionError("expected one mask per frame: " + std::to_string(frames.size()) +
                             " frames, " + std::to_string(masks.size()) + " masks");
    }
}

// Optimises on `pairs` and appends their flows to `result`.
void optimise_batch(const SessionConfig& session, std::vector<PairSample> pairs,
                    std::span<const std::size_t> frame_ids, std::size_t iterations,
                    std::vector<double>& params, StreamResult& result) {
    const MotionParams shape = MotionParams::zeros(session.motion);
    if (!session.share_params || params.empty()) params = shape.to_vector();
    const MotionObjective objective(shape, std::move(pairs), session.photometric);

    OptimizerSpec spec = session.optimizer;
    spec.iterations = iterations;
    OptimizationTrace trace = run_optimizer(objective, params, spec);
    params = trace.params;

    for (std::size_t i = 0; i < frame_ids.size(); ++i) {
        EmittedFlow out;
        out.frame = frame_ids[i];
        out.flow = objective.flow(params, i);
        out.losses = trace.losses;
        out.rsd_steps = trace.rsd_steps;
        out.update = result.updates;
        result.flows.push_back(std::move(out));
    }
    ++result.updates;
}

}  // namespace

StreamResult run_streaming(const SessionConfig& session, std::span<const Grid> frames,
                           std::span<const BinaryMask> masks, std::size_t iterations) {
    check_inputs(frames, masks);
    StreamResult result;
    FrameCache cache(2);
    std::vector<double> params;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        FeatureStack feat = extract_features(frames[t], session.extractor);
        ++result.featurizations;
        if (t > 0) {
            const auto& prev = cache.at(t - 1);
            const PairSample pair{&frames[t], &prev.frame, &feat, &prev.features, &masks[t]};
            const std::size_t ids[] = {t};
            optimise_batch(session, {pair}, ids, iterations, params, result);
        }
        cache.put(t, frames[t], std::move(feat));
    }
    return result;
}

StreamResult run_batched(const SessionConfig& session, std::span<const Grid> frames,
                         std::span<const BinaryMask> masks, std::size_t interval,
                         std::size_t iterations) {
    check_inputs(frames, masks);
    if (interval == 0) throw ArgumentError("update interval must be >= 1");
    StreamResult result;
    FrameCache cache(interval + 1);
    std::vector<double> params;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        FeatureStack feat = extract_features(frames[t], session.extractor);
        ++result.featurizations;
        if (t == 0 || t % interval != 0) {
            cache.put(t, frames[t], std::move(feat));
            continue;
        }
        cache.put(t, frames[t], std::move(feat));
        std::vector<PairSample> pairs;
        std::vector<std::size_t> ids;
        for (std::size_t i = interval; i >= 1; --i) {
            const auto& cur = cache.at(t - i + 1);
            const auto& prev = cache.at(t - i);
            pairs.push_back({&cur.frame, &prev.frame, &cur.features, &prev.features, &masks[t - i + 1]});
            ids.push_back(t - i + 1);
        }
        if (pairs.size() != interval || ids.size() != interval) {
            throw InternalError("batch size " + std::to_string(pairs.size()) + " != interval " +
                                std::to_string(interval));
        }
        optimise_batch(session, std::move(pairs), ids, iterations, params, result);
    }
    return result;
}

}  // namespace rsdflow
