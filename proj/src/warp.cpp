#include "rsdflow/warp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsdflow/errors.hpp"

namespace rsdflow {

FlowField::FlowField(Grid grid) : grid_(std::move(grid)) {
    if (grid_.channels() != 2) {
        throw DimensionError("flow field needs 2 channels, got " + grid_.shape_string());
    }
}

FlowField FlowField::uniform(std::size_t height, std::size_t width, double du, double dv) {
    FlowField f(height, width);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            f.du(y, x) = du;
            f.dv(y, x) = dv;
        }
    }
    return f;
}

namespace {

void check_shapes(const Grid& source, const FlowField& flow, const char* op) {
    if (source.height() != flow.height() || source.width() != flow.width()) {
        throw DimensionError(std::string(op) + ": source " + source.shape_string() + " vs flow " +
                             flow.grid().shape_string());
    }
}

// One axis of a clamped bilinear lookup.
struct Axis {
    std::size_t lo;
    std::size_t hi;
    double frac;
    bool clamped;
};

Axis sample_axis(double coord, std::size_t size) {
    const double top = static_cast<double>(size - 1);
    Axis a{};
    a.clamped = coord < 0.0 || coord > top;
    const double c = std::clamp(coord, 0.0, top);
    a.lo = static_cast<std::size_t>(std::floor(c));
    a.hi = std::min(a.lo + 1, size - 1);
    a.frac = c - static_cast<double>(a.lo);
    // Right-hand limit at the last pixel runs into the clamp.
    if (a.lo == size - 1) a.clamped = true;
    return a;
}

}  // namespace

Grid warp(const Grid& source, const FlowField& flow) {
    check_shapes(source, flow, "warp");
    const std::size_t C = source.channels();
    Grid out(source.height(), source.width(), C);
    for (std::size_t y = 0; y < source.height(); ++y) {
        for (std::size_t x = 0; x < source.width(); ++x) {
            const Axis ax = sample_axis(static_cast<double>(x) + flow.du(y, x), source.width());
            const Axis ay = sample_axis(static_cast<double>(y) + flow.dv(y, x), source.height());
            for (std::size_t c = 0; c < C; ++c) {
                const double top = (1.0 - ax.frac) * source.at(ay.lo, ax.lo, c) + ax.frac * source.at(ay.lo, ax.hi, c);
                const double bot = (1.0 - ax.frac) * source.at(ay.hi, ax.lo, c) + ax.frac * source.at(ay.hi, ax.hi, c);
                out.at(y, x, c) = (1.0 - ay.frac) * top + ay.frac * bot;
            }
        }
    }
    return out;
}

WarpGradient warp_backward(const Grid& source, const FlowField& flow, const Grid& upstream) {
    check_shapes(source, flow, "warp_backward");
    require_same_shape(source, upstream, "warp_backward");
    const std::size_t C = source.channels();
    const std::size_t W = source.width();
    WarpGradient g{Grid(source.height(), W, C), FlowField(source.height(), W)};
    for (std::size_t y = 0; y < source.height(); ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const Axis ax = sample_axis(static_cast<double>(x) + flow.du(y, x), W);
            const Axis ay = sample_axis(static_cast<double>(y) + flow.dv(y, x), source.height());
            double d_du = 0.0;
            double d_dv = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                const double u = upstream.at(y, x, c);
                if (u == 0.0) continue;
                const double s00 = source.at(ay.lo, ax.lo, c);
                const double s01 = source.at(ay.lo, ax.hi, c);
                const double s10 = source.at(ay.hi, ax.lo, c);
                const double s11 = source.at(ay.hi, ax.hi, c);
                g.source.at(ay.lo, ax.lo, c) += (1.0 - ay.frac) * (1.0 - ax.frac) * u;
                g.source.at(ay.lo, ax.hi, c) += (1.0 - ay.frac) * ax.frac * u;
                g.source.at(ay.hi, ax.lo, c) += ay.frac * (1.0 - ax.frac) * u;
                g.source.at(ay.hi, ax.hi, c) += ay.frac * ax.frac * u;
                if (!ax.clamped) d_du += u * ((1.0 - ay.frac) * (s01 - s00) + ay.frac * (s11 - s10));
                if (!ay.clamped) d_dv += u * ((1.0 - ax.frac) * (s10 - s00) + ax.frac * (s11 - s01));
            }
            g.flow.du(y, x) = d_du;
            g.flow.dv(y, x) = d_dv;
        }
    }
    return g;
}

Grid warp_chain(const Grid& source, const FlowField& older_flow, const FlowField& newer_flow) {
    if (older_flow.height() != newer_flow.height() || older_flow.width() != newer_flow.width()) {
        throw DimensionError("warp_chain: flow shapes differ");
    }
    return warp(warp(source, older_flow), newer_flow);
}

}  // namespace rsdflow
