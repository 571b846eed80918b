#include "rsdflow/conv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsdflow/errors.hpp"

namespace rsdflow {

ConvKernel::ConvKernel(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
                       std::size_t kernel_w, bool with_bias)
    : in_(in_channels), out_(out_channels), kh_(kernel_h), kw_(kernel_w),
      weights_(in_channels * out_channels * kernel_h * kernel_w, 0.0),
      bias_(with_bias ? out_channels : 0, 0.0) {
    if (kernel_h % 2 == 0 || kernel_w % 2 == 0) {
        throw DimensionError("kernel dims must be odd, got " + std::to_string(kernel_h) + "x" +
                             std::to_string(kernel_w));
    }
}

ConvKernel ConvKernel::zeros_like() const {
    return ConvKernel(in_, out_, kh_, kw_, has_bias());
}

ConvKernel ConvKernel::identity(std::size_t channels, std::size_t kernel_size, bool with_bias) {
    ConvKernel k(channels, channels, kernel_size, kernel_size, with_bias);
    const std::size_t c = kernel_size / 2;
    for (std::size_t i = 0; i < channels; ++i) k.weight(i, i, c, c) = 1.0;
    return k;
}

Grid conv2d(const Grid& input, const ConvKernel& kernel) {
    if (input.channels() != kernel.in_channels()) {
        throw DimensionError("conv2d: input has " + std::to_string(input.channels()) +
                             " channels, kernel expects " + std::to_string(kernel.in_channels()));
    }
    const auto H = static_cast<std::ptrdiff_t>(input.height());
    const auto W = static_cast<std::ptrdiff_t>(input.width());
    const std::size_t C = kernel.in_channels();
    const std::size_t O = kernel.out_channels();
    const auto ry = static_cast<std::ptrdiff_t>(kernel.kernel_h() / 2);
    const auto rx = static_cast<std::ptrdiff_t>(kernel.kernel_w() / 2);

    Grid out(input.height(), input.width(), O);
    for (std::ptrdiff_t y = 0; y < H; ++y) {
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            for (std::size_t o = 0; o < O; ++o) {
                double acc = kernel.has_bias() ? kernel.bias()[o] : 0.0;
                for (std::ptrdiff_t dy = -ry; dy <= ry; ++dy) {
                    const std::ptrdiff_t sy = y + dy;
                    if (sy < 0 || sy >= H) continue;
                    for (std::ptrdiff_t dx = -rx; dx <= rx; ++dx) {
                        const std::ptrdiff_t sx = x + dx;
                        if (sx < 0 || sx >= W) continue;
                        const double* px = &input.data()[(sy * W + sx) * C];
                        for (std::size_t i = 0; i < C; ++i) {
                            acc += kernel.weight(o, i, dy + ry, dx + rx) * px[i];
                        }
                    }
                }
                out.at(y, x, o) = acc;
            }
        }
    }
    return out;
}

ConvGradient conv2d_backward(const Grid& input, const ConvKernel& kernel, const Grid& upstream) {
    if (input.channels() != kernel.in_channels()) {
        throw DimensionError("conv2d_backward: input/kernel channel mismatch");
    }
    if (!upstream.same_extent(input) || upstream.channels() != kernel.out_channels()) {
        throw DimensionError("conv2d_backward: upstream " + upstream.shape_string() +
                             " does not match conv output of " + input.shape_string());
    }
    const auto H = static_cast<std::ptrdiff_t>(input.height());
    const auto W = static_cast<std::ptrdiff_t>(input.width());
    const std::size_t C = kernel.in_channels();
    const std::size_t O = kernel.out_channels();
    const auto ry = static_cast<std::ptrdiff_t>(kernel.kernel_h() / 2);
    const auto rx = static_cast<std::ptrdiff_t>(kernel.kernel_w() / 2);

    ConvGradient g{Grid(input.height(), input.width(), C), kernel.zeros_like()};
    for (std::ptrdiff_t y = 0; y < H; ++y) {
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            for (std::size_t o = 0; o < O; ++o) {
                const double u = upstream.at(y, x, o);
                if (u == 0.0) continue;
                if (kernel.has_bias()) g.kernel.bias()[o] += u;
                for (std::ptrdiff_t dy = -ry; dy <= ry; ++dy) {
                    const std::ptrdiff_t sy = y + dy;
                    if (sy < 0 || sy >= H) continue;
                    for (std::ptrdiff_t dx = -rx; dx <= rx; ++dx) {
                        const std::ptrdiff_t sx = x + dx;
                        if (sx < 0 || sx >= W) continue;
                        const std::size_t base = (sy * W + sx) * C;
                        for (std::size_t i = 0; i < C; ++i) {
                            g.kernel.weight(o, i, dy + ry, dx + rx) += u * input.data()[base + i];
                            g.input.data()[base + i] += u * kernel.weight(o, i, dy + ry, dx + rx);
                        }
                    }
                }
            }
        }
    }
    return g;
}

namespace {

// Bilinear source taps for one output coordinate along one axis.
struct Taps {
    std::size_t lo;
    std::size_t hi;
    double frac;
};

Taps resize_taps(std::size_t out_index, std::size_t scale, std::size_t in_size) {
    double s = (static_cast<double>(out_index) + 0.5) / static_cast<double>(scale) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
    const auto lo = static_cast<std::size_t>(std::floor(s));
    const std::size_t hi = std::min(lo + 1, in_size - 1);
    return {lo, hi, s - static_cast<double>(lo)};
}

}  // namespace

Grid bilinear_resize(const Grid& input, std::size_t scale) {
    if (scale == 0) throw ArgumentError("bilinear_resize: scale must be >= 1");
    if (scale == 1) return input;
    const std::size_t C = input.channels();
    Grid out(input.height() * scale, input.width() * scale, C);
    for (std::size_t y = 0; y < out.height(); ++y) {
        const Taps ty = resize_taps(y, scale, input.height());
        for (std::size_t x = 0; x < out.width(); ++x) {
            const Taps tx = resize_taps(x, scale, input.width());
            for (std::size_t c = 0; c < C; ++c) {
                const double top = (1.0 - tx.frac) * input.at(ty.lo, tx.lo, c) + tx.frac * input.at(ty.lo, tx.hi, c);
                const double bot = (1.0 - tx.frac) * input.at(ty.hi, tx.lo, c) + tx.frac * input.at(ty.hi, tx.hi, c);
                out.at(y, x, c) = (1.0 - ty.frac) * top + ty.frac * bot;
            }
        }
    }
    return out;
}

Grid bilinear_resize_backward(const Grid& upstream, std::size_t input_height,
                              std::size_t input_width, std::size_t scale) {
    if (scale == 0) throw ArgumentError("bilinear_resize_backward: scale must be >= 1");
    if (upstream.height() != input_height * scale || upstream.width() != input_width * scale) {
        throw DimensionError("bilinear_resize_backward: upstream " + upstream.shape_string() +
                             " is not input x" + std::to_string(scale));
    }
    if (scale == 1) return upstream;
    const std::size_t C = upstream.channels();
    Grid g(input_height, input_width, C);
    for (std::size_t y = 0; y < upstream.height(); ++y) {
        const Taps ty = resize_taps(y, scale, input_height);
        for (std::size_t x = 0; x < upstream.width(); ++x) {
            const Taps tx = resize_taps(x, scale, input_width);
            for (std::size_t c = 0; c < C; ++c) {
                const double u = upstream.at(y, x, c);
                g.at(ty.lo, tx.lo, c) += (1.0 - ty.frac) * (1.0 - tx.frac) * u;
                g.at(ty.lo, tx.hi, c) += (1.0 - ty.frac) * tx.frac * u;
                g.at(ty.hi, tx.lo, c) += ty.frac * (1.0 - tx.frac) * u;
                g.at(ty.hi, tx.hi, c) += ty.frac * tx.frac * u;
            }
        }
    }
    return g;
}

}  // namespace rsdflow
