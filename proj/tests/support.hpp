#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "rsdflow/grid.hpp"
#include "rsdflow/warp.hpp"

namespace support {

inline rsdflow::Grid random_grid(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed,
                                 double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    rsdflow::Grid g(h, w, c);
    for (auto& v : g.data()) v = d(rng);
    return g;
}

// Flow whose sample coordinates sit at least `margin` away from integers.
inline rsdflow::FlowField offgrid_flow(std::size_t h, std::size_t w, std::uint64_t seed, double span = 1.5,
                                       double margin = 0.15) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> whole(-span, span);
    std::uniform_real_distribution<double> frac(margin, 1.0 - margin);
    rsdflow::FlowField f(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            f.du(y, x) = std::floor(whole(rng)) + frac(rng);
            f.dv(y, x) = std::floor(whole(rng)) + frac(rng);
        }
    return f;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central difference of f along data element i of g.
template <class F>
double central_diff(rsdflow::Grid& g, std::size_t i, F&& f, double h = 1e-6) {
    const double keep = g.data()[i];
    g.data()[i] = keep + h;
    const double up = f();
    g.data()[i] = keep - h;
    const double down = f();
    g.data()[i] = keep;
    return (up - down) / (2.0 * h);
}

}  // namespace support
