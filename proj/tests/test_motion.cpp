#include <cmath>

#include "doctest.h"
#include "rsdflow/errors.hpp"
#include "rsdflow/motion.hpp"
#include "rsdflow/online.hpp"
#include "support.hpp"

using namespace rsdflow;
using support::random_grid;

namespace {

MotionParams random_params(const MotionShape& shape, std::uint64_t seed, double w_scale, double b_scale) {
    MotionParams p = MotionParams::zeros(shape);
    std::vector<double> flat = p.to_vector();
    const Grid r = random_grid(1, 1, flat.size(), seed, -1.0, 1.0);
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = r.data()[i];
    p.assign(flat);
    for (auto& w : p.w1.weights()) w *= w_scale;
    for (auto& w : p.w2.weights()) w *= w_scale;
    for (auto& b : p.w2.bias()) b *= b_scale;
    return p;
}

}  // namespace

TEST_SUITE("extract_features") {
    const ExtractorSettings settings;

    TEST_CASE("identical frames give bit-identical features") {
        const Grid f = random_grid(32, 32, 3, 1);
        CHECK(extract_features(f, settings).grid == extract_features(f, settings).grid);
    }

    TEST_CASE("64x64 frame at scale 8 gives 8x8x16") {
        const FeatureStack s = extract_features(random_grid(64, 64, 3, 2), settings);
        CHECK(s.grid.height() == 8);
        CHECK(s.grid.width() == 8);
        CHECK(s.grid.channels() == 16);
        CHECK(all_finite(s.grid));
    }

    TEST_CASE("constant frame has all-zero gradient channels") {
        // Channels: 3 intensity means, then d/dx and d/dy of the grey level.
        const FeatureStack s = extract_features(Grid(32, 32, 3, 0.4), settings);
        for (std::size_t y = 0; y < s.grid.height(); ++y)
            for (std::size_t x = 0; x < s.grid.width(); ++x) {
                CHECK(s.grid.at(y, x, 0) == doctest::Approx(0.4));
                CHECK(s.grid.at(y, x, 3) == 0.0);
                CHECK(s.grid.at(y, x, 4) == 0.0);
            }
    }

    TEST_CASE("frame sides must be multiples of the scale") {
        CHECK_THROWS_AS(extract_features(Grid(30, 32, 3), settings), DimensionError);
    }
}

TEST_SUITE("predict_flow") {
    const MotionShape shape;
    const ExtractorSettings settings;

    TEST_CASE("zero parameters predict zero flow") {
        const FeatureStack a = extract_features(random_grid(32, 32, 3, 1), settings);
        const FeatureStack b = extract_features(random_grid(32, 32, 3, 2), settings);
        const FlowField f = predict_flow(MotionParams::zeros(shape), a, b);
        for (double v : f.grid().data()) CHECK(v == 0.0);
    }

    TEST_CASE("w2 bias alone gives a uniform flow") {
        MotionParams p = MotionParams::zeros(shape);
        p.w2.bias() = {1.25, -0.75};
        const FeatureStack a = extract_features(random_grid(32, 32, 3, 3), settings);
        const FlowField f = predict_flow(p, a, a);
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = 0; x < 32; ++x) {
                CHECK(f.du(y, x) == 1.25);
                CHECK(f.dv(y, x) == -0.75);
            }
    }

    TEST_CASE("equals composing the module operations") {
        const MotionParams p = random_params(shape, 4, 0.3, 1.0);
        const FeatureStack a = extract_features(random_grid(32, 32, 3, 5), settings);
        const FeatureStack b = extract_features(random_grid(32, 32, 3, 6), settings);
        const Grid composed = bilinear_resize(conv2d(conv2d(concat_channels(a.grid, b.grid), p.w1), p.w2), 8);
        CHECK(predict_flow(p, a, b).grid() == composed);
    }

    TEST_CASE("linear in w2 for fixed w1") {
        const MotionParams base = random_params(shape, 7, 0.3, 1.0);
        MotionParams pa = base, pb = base, sum = base;
        const MotionParams other = random_params(shape, 8, 0.3, 1.0);
        pb.w2 = other.w2;
        for (std::size_t i = 0; i < sum.w2.weights().size(); ++i) sum.w2.weights()[i] += other.w2.weights()[i];
        for (std::size_t i = 0; i < 2; ++i) sum.w2.bias()[i] += other.w2.bias()[i];
        const FeatureStack a = extract_features(random_grid(32, 32, 3, 9), settings);
        const FeatureStack b = extract_features(random_grid(32, 32, 3, 10), settings);
        const Grid lhs = predict_flow(sum, a, b).grid();
        const Grid rhs = add(predict_flow(pa, a, b).grid(), predict_flow(pb, a, b).grid());
        for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(std::abs(lhs.data()[i] - rhs.data()[i]) <= 1e-6);
    }

    TEST_CASE("feature channel mismatch is a dimension error") {
        const FeatureStack a = extract_features(random_grid(32, 32, 3, 11), settings);
        MotionShape wrong = shape;
        wrong.in_channels = 16;
        CHECK_THROWS_AS(predict_flow(MotionParams::zeros(wrong), a, a), DimensionError);
    }

    TEST_CASE("flat parameter order round-trips") {
        const MotionParams p = random_params(shape, 12, 1.0, 1.0);
        MotionParams q = MotionParams::zeros(shape);
        q.assign(p.to_vector());
        CHECK(q.to_vector() == p.to_vector());
        CHECK(p.parameter_count() == 32 * 16 + 16 + 16 * 2 * 9 + 2);
        CHECK_THROWS_AS(q.assign(std::vector<double>(3)), DimensionError);
    }
}

TEST_SUITE("loss_and_gradient") {
    const MotionShape shape;
    const ExtractorSettings settings;

    TEST_CASE("identical frames with zero parameters give zero loss") {
        const Grid f = random_grid(32, 32, 3, 1);
        const FeatureStack s = extract_features(f, settings);
        BinaryMask m(32, 32);
        m.set(10, 12);
        const MotionEvaluation ev = loss_and_gradient(MotionParams::zeros(shape), {&f, &f, &s, &s, &m}, PhotometricConfig{});
        CHECK(ev.loss == doctest::Approx(0.0).epsilon(1e-12));
    }

    TEST_CASE("empty mask gives zero loss, zero gradient and the flag") {
        const Grid a = random_grid(32, 32, 3, 2), b = random_grid(32, 32, 3, 3);
        const FeatureStack fa = extract_features(a, settings), fb = extract_features(b, settings);
        const BinaryMask m(32, 32);
        const MotionEvaluation ev = loss_and_gradient(random_params(shape, 4, 0.3, 1.0), {&a, &b, &fa, &fb, &m}, PhotometricConfig{});
        CHECK(ev.loss == 0.0);
        CHECK(ev.empty_mask);
        for (double v : ev.grad.to_vector()) CHECK(v == 0.0);
    }

    TEST_CASE("flat frames report a zero gradient instead of NaN") {
        const Grid a(32, 32, 3, 0.2), b(32, 32, 3, 0.7);
        const FeatureStack fa = extract_features(a, settings), fb = extract_features(b, settings);
        const BinaryMask m(32, 32, true);
        const MotionEvaluation ev = loss_and_gradient(MotionParams::zeros(shape), {&a, &b, &fa, &fb, &m}, PhotometricConfig{});
        CHECK(ev.loss > 0.0);
        CHECK(ev.zero_gradient);
        CHECK(ev.grad_norm_sq == 0.0);
        const MotionObjective obj(MotionParams::zeros(shape), {{&a, &b, &fa, &fb, &m}}, PhotometricConfig{});
        CHECK_THROWS_AS(rsd_step(obj, MotionParams::zeros(shape).to_vector()), StationaryPointError);
    }

    TEST_CASE("16x16 instance: every parameter matches central finite differences") {
        const Grid cur = random_grid(16, 16, 3, 20), prev = random_grid(16, 16, 3, 21);
        const FeatureStack fc = extract_features(cur, settings), fp = extract_features(prev, settings);
        BinaryMask m(16, 16);
        for (std::size_t y = 4; y < 12; ++y)
            for (std::size_t x = 3; x < 13; ++x) m.set(y, x);
        PhotometricConfig cfg;
        cfg.mask_pad = 2;
        const MotionParams p = random_params(shape, 22, 0.2, 1.3);
        const MotionEvaluation ev = loss_and_gradient(p, {&cur, &prev, &fc, &fp, &m}, cfg);
        const std::vector<double> g = ev.grad.to_vector();
        Grid flat(1, 1, p.parameter_count(), p.to_vector());
        MotionParams probe = p;
        auto L = [&] {
            probe.assign(flat.data());
            return loss_and_gradient(probe, {&cur, &prev, &fc, &fp, &m}, cfg).loss;
        };
        double worst = 0.0;
        for (std::size_t i = 0; i < flat.size(); ++i) worst = std::max(worst, support::rel_err(g[i], support::central_diff(flat, i, L), 1e-6));
        CHECK(worst <= 1e-3);
        double norm = 0.0;
        for (double v : g) norm += v * v;
        CHECK(ev.grad_norm_sq == doctest::Approx(norm));
    }
}
