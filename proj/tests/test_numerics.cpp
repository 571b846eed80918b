#include <cmath>

#include "doctest.h"
#include "rsdflow/conv.hpp"
#include "rsdflow/errors.hpp"
#include "rsdflow/grid.hpp"
#include "rsdflow/mask.hpp"
#include "support.hpp"

using namespace rsdflow;
using support::random_grid;

namespace {

ConvKernel random_kernel(std::size_t in, std::size_t out, std::size_t k, std::uint64_t seed, bool bias = true) {
    ConvKernel kern(in, out, k, k, bias);
    const Grid w = random_grid(1, 1, kern.weights().size(), seed, -1.0, 1.0);
    std::copy(w.data().begin(), w.data().end(), kern.weights().begin());
    if (bias) {
        const Grid b = random_grid(1, 1, out, seed + 1, -1.0, 1.0);
        std::copy(b.data().begin(), b.data().end(), kern.bias().begin());
    }
    return kern;
}

// Sliding-window dot product with zero padding, written independently.
Grid naive_conv(const Grid& in, const ConvKernel& k) {
    Grid out(in.height(), in.width(), k.out_channels());
    const int ry = static_cast<int>(k.kernel_h() / 2), rx = static_cast<int>(k.kernel_w() / 2);
    for (int y = 0; y < static_cast<int>(in.height()); ++y)
        for (int x = 0; x < static_cast<int>(in.width()); ++x)
            for (std::size_t o = 0; o < k.out_channels(); ++o) {
                double s = k.has_bias() ? k.bias()[o] : 0.0;
                for (std::size_t i = 0; i < k.in_channels(); ++i)
                    for (int dy = -ry; dy <= ry; ++dy)
                        for (int dx = -rx; dx <= rx; ++dx) {
                            const int yy = y + dy, xx = x + dx;
                            if (yy < 0 || xx < 0 || yy >= static_cast<int>(in.height()) ||
                                xx >= static_cast<int>(in.width()))
                                continue;
                            s += in.at(yy, xx, i) * k.weight(o, i, dy + ry, dx + rx);
                        }
                out.at(y, x, o) = s;
            }
    return out;
}

ConvKernel without_bias(ConvKernel k) {
    for (auto& b : k.bias()) b = 0.0;
    return k;
}

}  // namespace

TEST_SUITE("conv2d") {
    TEST_CASE("1x1 identity kernel with zero bias returns the input") {
        const Grid in = random_grid(4, 5, 3, 1);
        CHECK(conv2d(in, ConvKernel::identity(3, 1)) == in);
    }

    TEST_CASE("zero weights and zero bias give zero output") {
        const Grid in = random_grid(4, 5, 2, 2);
        const Grid out = conv2d(in, ConvKernel(2, 3, 3, 3));
        CHECK(out.channels() == 3);
        for (double v : out.data()) CHECK(v == 0.0);
    }

    TEST_CASE("random 5x5x2 input matches the brute-force sliding window") {
        const Grid in = random_grid(5, 5, 2, 3);
        const ConvKernel k = random_kernel(2, 3, 3, 4);
        const Grid got = conv2d(in, k);
        const Grid want = naive_conv(in, k);
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got.data()[i] - want.data()[i]) <= 1e-6);
    }

    TEST_CASE("channel mismatch and even kernels are dimension errors") {
        CHECK_THROWS_AS(conv2d(random_grid(3, 3, 2, 5), ConvKernel(3, 1, 3, 3)), DimensionError);
        CHECK_THROWS_AS(ConvKernel(1, 1, 2, 3), DimensionError);
    }

    TEST_CASE("linearity in the input") {
        const ConvKernel k = without_bias(random_kernel(2, 2, 3, 6));
        const Grid X = random_grid(6, 7, 2, 7), Y = random_grid(6, 7, 2, 8);
        const double a = 0.7, b = -1.3;
        const Grid lhs = conv2d(add(scale(X, a), scale(Y, b)), k);
        const Grid rhs = add(scale(conv2d(X, k), a), scale(conv2d(Y, k), b));
        for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(support::rel_err(lhs.data()[i], rhs.data()[i], 1e-6) <= 1e-5);
    }

    TEST_CASE("adjoint identity <conv(X), U> = <X, grad_input(U)>") {
        for (std::uint64_t seed = 10; seed < 15; ++seed) {
            const ConvKernel k = without_bias(random_kernel(3, 2, 3, seed));
            const Grid X = random_grid(6, 5, 3, seed + 100, -1, 1);
            const Grid U = random_grid(6, 5, 2, seed + 200, -1, 1);
            const double lhs = dot(conv2d(X, k), U);
            const double rhs = dot(X, conv2d_backward(X, k, U).input);
            CHECK(support::rel_err(lhs, rhs) <= 1e-5);
        }
    }
}

TEST_SUITE("conv2d_backward") {
    TEST_CASE("zero upstream gives zero gradients") {
        const Grid X = random_grid(4, 4, 2, 1);
        const ConvKernel k = random_kernel(2, 2, 3, 2);
        const ConvGradient g = conv2d_backward(X, k, Grid(4, 4, 2));
        for (double v : g.input.data()) CHECK(v == 0.0);
        for (double v : g.kernel.weights()) CHECK(v == 0.0);
        for (double v : g.kernel.bias()) CHECK(v == 0.0);
    }

    TEST_CASE("1x1 identity kernel passes the upstream through") {
        const Grid X = random_grid(3, 4, 2, 3);
        const Grid U = random_grid(3, 4, 2, 4);
        CHECK(conv2d_backward(X, ConvKernel::identity(2, 1), U).input == U);
    }

    TEST_CASE("gradients match central finite differences") {
        Grid X = random_grid(5, 6, 2, 5, -1, 1);
        ConvKernel k = random_kernel(2, 3, 3, 6);
        const Grid U = random_grid(5, 6, 3, 7, -1, 1);
        const ConvGradient g = conv2d_backward(X, k, U);
        auto L = [&] { return dot(conv2d(X, k), U); };
        for (std::size_t i = 0; i < X.size(); ++i)
            CHECK(support::rel_err(g.input.data()[i], support::central_diff(X, i, L), 1e-6) <= 1e-6);
        Grid flat(1, 1, k.weights().size(), k.weights());
        auto Lw = [&] {
            std::copy(flat.data().begin(), flat.data().end(), k.weights().begin());
            return L();
        };
        for (std::size_t i = 0; i < flat.size(); ++i)
            CHECK(support::rel_err(g.kernel.weights()[i], support::central_diff(flat, i, Lw), 1e-6) <= 1e-6);
        Grid bias(1, 1, k.bias().size(), k.bias());
        auto Lb = [&] {
            std::copy(bias.data().begin(), bias.data().end(), k.bias().begin());
            return L();
        };
        for (std::size_t i = 0; i < bias.size(); ++i)
            CHECK(support::rel_err(g.kernel.bias()[i], support::central_diff(bias, i, Lb), 1e-6) <= 1e-6);
    }

    TEST_CASE("upstream shape mismatch is a dimension error") {
        CHECK_THROWS_AS(conv2d_backward(Grid(3, 3, 1), ConvKernel(1, 2, 3, 3), Grid(3, 3, 1)), DimensionError);
    }
}

TEST_SUITE("bilinear_resize") {
    TEST_CASE("scale 1 is the identity") {
        const Grid in = random_grid(3, 5, 2, 1);
        CHECK(bilinear_resize(in, 1) == in);
    }

    TEST_CASE("1x1 grid at scale 8 becomes a constant 8x8 grid") {
        const Grid out = bilinear_resize(Grid(1, 1, 1, 0.37), 8);
        CHECK(out.height() == 8);
        CHECK(out.width() == 8);
        for (double v : out.data()) CHECK(v == 0.37);
    }

    TEST_CASE("2x2 ramp upsampled x2 matches the half-pixel-centre table") {
        // Output centre o maps to input (o + 0.5) / 2 - 0.5, clamped: 0, .25, .75, 1.
        const Grid in(2, 2, 1, {0.0, 1.0, 2.0, 3.0});
        const double want[4][4] = {{0.0, 0.25, 0.75, 1.0},
                                   {0.5, 0.75, 1.25, 1.5},
                                   {1.5, 1.75, 2.25, 2.5},
                                   {2.0, 2.25, 2.75, 3.0}};
        const Grid out = bilinear_resize(in, 2);
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 4; ++x) CHECK(out.at(y, x) == doctest::Approx(want[y][x]).epsilon(1e-12));
    }

    TEST_CASE("constants are preserved exactly") {
        for (std::size_t s : {2u, 3u, 8u}) {
            const Grid out = bilinear_resize(Grid(3, 2, 2, 0.1), s);
            for (double v : out.data()) CHECK(v == 0.1);
        }
    }

    TEST_CASE("scale 0 is an argument error") {
        CHECK_THROWS_AS(bilinear_resize(Grid(2, 2, 1), 0), ArgumentError);
    }

    TEST_CASE("backward is the adjoint of the resize") {
        const Grid X = random_grid(3, 4, 2, 9, -1, 1);
        const Grid U = random_grid(24, 32, 2, 10, -1, 1);
        const double lhs = dot(bilinear_resize(X, 8), U);
        const double rhs = dot(X, bilinear_resize_backward(U, 3, 4, 8));
        CHECK(support::rel_err(lhs, rhs) <= 1e-12);
    }
}

TEST_SUITE("elementwise and reductions") {
    TEST_CASE("sigmoid") {
        CHECK(sigmoid(0.0) == 0.5);
        for (double x : {-800.0, -30.0, 30.0, 800.0}) {
            const double s = sigmoid(x);
            CHECK(std::isfinite(s));
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        CHECK(sigmoid(-5.0) == doctest::Approx(1.0 / (1.0 + std::exp(5.0))));
        const Grid g = sigmoid(Grid(2, 2, 1, 2.0));
        for (double v : g.data()) CHECK(v == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    }

    TEST_CASE("reduce_sum of zeros is zero") { CHECK(reduce_sum(Grid(3, 3, 2)) == 0.0); }

    TEST_CASE("masked mean of a ramp under a half mask") {
        Grid ramp(4, 6, 1);
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 6; ++x) ramp.at(y, x) = static_cast<double>(x + 10 * y);
        BinaryMask half(4, 6);
        double s = 0.0;
        int n = 0;
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 3; ++x) {
                half.set(y, x);
                s += static_cast<double>(x + 10 * y);
                ++n;
            }
        CHECK(reduce_mean(ramp, half) == doctest::Approx(s / n));
    }

    TEST_CASE("masked mean of an empty mask is 0") {
        CHECK(reduce_mean(random_grid(3, 3, 1, 2), BinaryMask(3, 3)) == 0.0);
    }

    TEST_CASE("elementwise ops reject shape mismatches") {
        CHECK_THROWS_AS(add(Grid(2, 2, 1), Grid(2, 3, 1)), DimensionError);
        CHECK_THROWS_AS(mul(Grid(2, 2, 1), Grid(2, 2, 2)), DimensionError);
        CHECK_THROWS_AS(reduce_mean(Grid(2, 2, 1), BinaryMask(3, 3)), DimensionError);
    }

    TEST_CASE("elementwise definitions") {
        const Grid a = random_grid(2, 3, 2, 3, -1, 1), b = random_grid(2, 3, 2, 4, -1, 1);
        const Grid s = add(a, b), d = sub(a, b), m = mul(a, b), ab = abs(a), c = clamp(a, -0.2, 0.3);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double x = a.data()[i], y = b.data()[i];
            CHECK(s.data()[i] == x + y);
            CHECK(d.data()[i] == x - y);
            CHECK(m.data()[i] == x * y);
            CHECK(ab.data()[i] == std::abs(x));
            CHECK(c.data()[i] == std::clamp(x, -0.2, 0.3));
        }
        const Grid cat = concat_channels(a, b);
        CHECK(cat.channels() == 4);
        CHECK(cat.at(1, 2, 3) == b.at(1, 2, 1));
    }

    TEST_CASE("module ops keep finite inputs finite") {
        const Grid a = random_grid(8, 8, 4, 5, -50, 50);
        const ConvKernel k = random_kernel(4, 4, 3, 6);
        CHECK(all_finite(conv2d(a, k)));
        CHECK(all_finite(sigmoid(a)));
        CHECK(all_finite(bilinear_resize(a, 3)));
    }
}
