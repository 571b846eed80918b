#pragma once

#include <cstddef>

#include "rsdflow/grid.hpp"

namespace rsdflow {

/// Per-pixel displacement from frame t to frame t-1, in pixels. Channel 0 is
/// the horizontal component du (along x / columns), channel 1 the vertical
/// component dv (along y / rows). Backward warping reconstructs frame t by
/// sampling frame t-1 at (x + du, y + dv).
class FlowField {
public:
    FlowField() = default;
    FlowField(std::size_t height, std::size_t width) : grid_(height, width, 2) {}
    /// Wraps a 2-channel grid; throws DimensionError otherwise.
    explicit FlowField(Grid grid);

    static FlowField uniform(std::size_t height, std::size_t width, double du, double dv);

    std::size_t height() const { return grid_.height(); }
    std::size_t width() const { return grid_.width(); }

    double& du(std::size_t y, std::size_t x) { return grid_.at(y, x, 0); }
    double du(std::size_t y, std::size_t x) const { return grid_.at(y, x, 0); }
    double& dv(std::size_t y, std::size_t x) { return grid_.at(y, x, 1); }
    double dv(std::size_t y, std::size_t x) const { return grid_.at(y, x, 1); }

    const Grid& grid() const { return grid_; }
    Grid& grid() { return grid_; }

    friend bool operator==(const FlowField&, const FlowField&) = default;

private:
    Grid grid_;
};

struct WarpGradient {
    Grid source;
    FlowField flow;
};

/// out(y, x) = bilinear sample of source at (x + du, y + dv), coordinates
/// clamped to the frame (border replication).
Grid warp(const Grid& source, const FlowField& flow);

/// Adjoint of warp. The flow derivative is the analytic derivative of the
/// bilinear interpolant; at integer sample coordinates it takes the
/// right-hand cell, and it is zero along an axis whose coordinate was clamped.
WarpGradient warp_backward(const Grid& source, const FlowField& flow, const Grid& upstream);

/// warp(warp(source, older_flow), newer_flow).
Grid warp_chain(const Grid& source, const FlowField& older_flow, const FlowField& newer_flow);

}  // namespace rsdflow
