#include <cmath>

#include "doctest.h"
#include "rsdflow/errors.hpp"
#include "rsdflow/online.hpp"
#include "rsdflow/sequence.hpp"
#include "support.hpp"

using namespace rsdflow;

namespace {

struct Clip {
    std::vector<Grid> frames;
    std::vector<BinaryMask> masks;
};

Clip moving_clip(std::size_t frames, std::uint64_t seed = 1, Displacement step = {2.0, -1.0}) {
    SyntheticSpec s;
    s.seed = seed;
    s.start_x = 6;
    s.start_y = 26;
    s.motions.assign(frames - 1, step);
    SyntheticSequence seq = synthesize_sequence(s);
    Clip c;
    for (std::size_t t = 0; t < frames; ++t) {
        c.frames.push_back(seq.bundle.frames[t]);
        c.masks.push_back(seq.bundle.object_mask(1, t));
    }
    return c;
}

SessionConfig desk_session() {
    SessionConfig s;
    s.photometric.mask_pad = 0;
    return s;
}

std::vector<std::size_t> emitted_frames(const StreamResult& r) {
    std::vector<std::size_t> out;
    for (const auto& f : r.flows) out.push_back(f.frame);
    return out;
}

}  // namespace

TEST_SUITE("FrameCache") {
    TEST_CASE("evicts oldest first once full") {
        FrameCache cache(2);
        for (std::size_t t = 0; t < 3; ++t) cache.put(t, Grid(1, 1, 1, static_cast<double>(t)), {});
        CHECK(cache.size() == 2);
        CHECK(cache.find(0) == nullptr);
        REQUIRE(cache.find(1) != nullptr);
        CHECK(cache.find(1)->frame.at(0, 0) == 1.0);
        CHECK(cache.at(2).index == 2);
    }

    TEST_CASE("a miss through at() is an internal error") {
        FrameCache cache(3);
        cache.put(4, Grid(1, 1, 1), {});
        CHECK_THROWS_AS(cache.at(3), InternalError);
    }

    TEST_CASE("zero capacity is rejected") { CHECK_THROWS_AS(FrameCache(0), ArgumentError); }
}

TEST_SUITE("MotionObjective") {
    TEST_CASE("batch loss and gradient are the mean over pairs") {
        const Clip c = moving_clip(3);
        std::vector<FeatureStack> feats;
        for (const auto& f : c.frames) feats.push_back(extract_features(f, {}));
        const PhotometricConfig cfg = desk_session().photometric;
        const MotionParams shape = MotionParams::zeros({});
        std::vector<double> p = shape.to_vector();
        p.back() = 0.4;
        p[p.size() - 2] = -0.7;
        const PairSample p1{&c.frames[1], &c.frames[0], &feats[1], &feats[0], &c.masks[1]};
        const PairSample p2{&c.frames[2], &c.frames[1], &feats[2], &feats[1], &c.masks[2]};
        const MotionObjective batch(shape, {p1, p2}, cfg);
        const MotionObjective one(shape, {p1}, cfg), two(shape, {p2}, cfg);
        const Evaluation b = batch.evaluate(p), e1 = one.evaluate(p), e2 = two.evaluate(p);
        CHECK(b.loss == doctest::Approx(0.5 * (e1.loss + e2.loss)).epsilon(1e-14));
        for (std::size_t i = 0; i < b.gradient.size(); ++i)
            CHECK(b.gradient[i] == doctest::Approx(0.5 * (e1.gradient[i] + e2.gradient[i])).epsilon(1e-12));
        CHECK(batch.value(p) == b.loss);
    }
}

TEST_SUITE("run_streaming") {
    TEST_CASE("two frames emit exactly one flow") {
        const Clip c = moving_clip(2);
        const StreamResult r = run_streaming(desk_session(), c.frames, c.masks, 2);
        REQUIRE(r.flows.size() == 1);
        CHECK(r.flows[0].frame == 1);
        CHECK(r.updates == 1);
    }

    TEST_CASE("five frames emit four flows and featurize each frame once") {
        const Clip c = moving_clip(5);
        const StreamResult r = run_streaming(desk_session(), c.frames, c.masks, 1);
        CHECK(emitted_frames(r) == std::vector<std::size_t>{1, 2, 3, 4});
        CHECK(r.featurizations == 5);
        CHECK(r.updates == 4);
    }

    TEST_CASE("identical consecutive frames give near-zero flow in the mask") {
        const Clip c = moving_clip(4, 3, {0.0, 0.0});
        const StreamResult r = run_streaming(desk_session(), c.frames, c.masks, 3);
        for (const auto& f : r.flows) {
            double mag = 0.0;
            const BinaryMask& m = c.masks[f.frame];
            for (std::size_t y = 0; y < 64; ++y)
                for (std::size_t x = 0; x < 64; ++x)
                    if (m.at(y, x)) mag += std::hypot(f.flow.du(y, x), f.flow.dv(y, x));
            CHECK(mag / static_cast<double>(m.count()) < 0.1);
        }
    }

    TEST_CASE("recovers the synthetic translation") {
        const Clip c = moving_clip(3, 5);
        const StreamResult r = run_streaming(desk_session(), c.frames, c.masks, 5);
        for (const auto& f : r.flows) {
            double u = 0.0, v = 0.0;
            const BinaryMask& m = c.masks[f.frame];
            for (std::size_t y = 0; y < 64; ++y)
                for (std::size_t x = 0; x < 64; ++x)
                    if (m.at(y, x)) {
                        u += f.flow.du(y, x);
                        v += f.flow.dv(y, x);
                    }
            const double n = static_cast<double>(m.count());
            CHECK(std::hypot(u / n + 2.0, v / n - 1.0) < 0.5);
            CHECK(f.losses.back() < f.losses.front());
        }
    }

    TEST_CASE("fresh parameters per pair unless sharing is enabled") {
        const Clip c = moving_clip(3, 6);
        SessionConfig shared = desk_session();
        shared.share_params = true;
        const StreamResult fresh = run_streaming(desk_session(), c.frames, c.masks, 3);
        const StreamResult warm = run_streaming(shared, c.frames, c.masks, 3);
        CHECK(fresh.flows[0].losses == warm.flows[0].losses);
        CHECK(warm.flows[1].losses.front() < fresh.flows[1].losses.front());
    }

    TEST_CASE("input validation") {
        const Clip c = moving_clip(2);
        CHECK_THROWS_AS(run_streaming(desk_session(), std::span(c.frames).first(1), std::span(c.masks).first(1), 1), ArgumentError);
        CHECK_THROWS_AS(run_streaming(desk_session(), c.frames, std::span(c.masks).first(1), 1), DimensionError);
    }
}

TEST_SUITE("run_batched") {
    TEST_CASE("interval 1 matches streaming within 1e-6") {
        const Clip c = moving_clip(6, 2);
        const StreamResult s = run_streaming(desk_session(), c.frames, c.masks, 2);
        const StreamResult b = run_batched(desk_session(), c.frames, c.masks, 1, 2);
        REQUIRE(s.flows.size() == b.flows.size());
        for (std::size_t i = 0; i < s.flows.size(); ++i) {
            CHECK(s.flows[i].frame == b.flows[i].frame);
            const auto& x = s.flows[i].flow.grid().storage();
            const auto& y = b.flows[i].flow.grid().storage();
            for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(x[k] - y[k]) <= 1e-6);
        }
    }

    TEST_CASE("interval 2 over 5 frames updates at t = 2 and t = 4") {
        const Clip c = moving_clip(5);
        const StreamResult r = run_batched(desk_session(), c.frames, c.masks, 2, 1);
        CHECK(emitted_frames(r) == std::vector<std::size_t>{1, 2, 3, 4});
        std::vector<std::size_t> updates;
        for (const auto& f : r.flows) updates.push_back(f.update);
        CHECK(updates == std::vector<std::size_t>{0, 0, 1, 1});
        CHECK(r.updates == 2);
        CHECK(r.featurizations == 5);
    }

    TEST_CASE("the pair after the last multiple of the interval is deferred") {
        const Clip c = moving_clip(6);
        const StreamResult r = run_batched(desk_session(), c.frames, c.masks, 2, 1);
        CHECK(emitted_frames(r) == std::vector<std::size_t>{1, 2, 3, 4});
        CHECK(r.featurizations == 6);
    }

    TEST_CASE("interval longer than the sequence never updates") {
        const Clip c = moving_clip(4);
        const StreamResult r = run_batched(desk_session(), c.frames, c.masks, 7, 1);
        CHECK(r.flows.empty());
        CHECK(r.updates == 0);
        CHECK(r.featurizations == 4);
    }

    TEST_CASE("interval 0 is rejected") {
        const Clip c = moving_clip(2);
        CHECK_THROWS_AS(run_batched(desk_session(), c.frames, c.masks, 0, 1), ArgumentError);
    }
}
