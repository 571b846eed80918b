#include "rsdflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rsdflow/errors.hpp"
#include "rsdflow/mask.hpp"

namespace rsdflow {

Grid::Grid(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : height_(height), width_(width), channels_(channels),
      data_(height * width * channels, fill) {}

Grid::Grid(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (data_.size() != height * width * channels) {
        throw DimensionError("grid data length " + std::to_string(data_.size()) +
                             " does not match " + shape_string());
    }
}

std::string Grid::shape_string() const {
    std::ostringstream os;
    os << height_ << "x" << width_ << "x" << channels_;
    return os.str();
}

Grid Grid::channel(std::size_t c) const {
    if (c >= channels_) {
        throw DimensionError("channel " + std::to_string(c) + " out of range for " + shape_string());
    }
    Grid out(height_, width_, 1);
    for (std::size_t i = 0; i < height_ * width_; ++i) {
        out.data_[i] = data_[i * channels_ + c];
    }
    return out;
}

void require_same_shape(const Grid& a, const Grid& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                             b.shape_string());
    }
}

void require_same_extent(const Grid& a, const Grid& b, const char* op) {
    if (!a.same_extent(b)) {
        throw DimensionError(std::string(op) + ": extent mismatch " + a.shape_string() + " vs " +
                             b.shape_string());
    }
}

namespace {

template <typename Fn>
Grid zip(const Grid& a, const Grid& b, const char* op, Fn fn) {
    require_same_shape(a, b, op);
    Grid out(a.height(), a.width(), a.channels());
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(x[i], y[i]);
    return out;
}

template <typename Fn>
Grid map(const Grid& a, Fn fn) {
    Grid out(a.height(), a.width(), a.channels());
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(x[i]);
    return out;
}

}  // namespace

Grid add(const Grid& a, const Grid& b) {
    return zip(a, b, "add", [](double x, double y) { return x + y; });
}
Grid sub(const Grid& a, const Grid& b) {
    return zip(a, b, "sub", [](double x, double y) { return x - y; });
}
Grid mul(const Grid& a, const Grid& b) {
    return zip(a, b, "mul", [](double x, double y) { return x * y; });
}
Grid abs(const Grid& a) {
    return map(a, [](double x) { return std::abs(x); });
}
Grid scale(const Grid& a, double s) {
    return map(a, [s](double x) { return x * s; });
}
Grid add_scalar(const Grid& a, double s) {
    return map(a, [s](double x) { return x + s; });
}

double sigmoid(double x) {
    // Split on sign so exp never overflows.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Grid sigmoid(const Grid& a) {
    return map(a, [](double x) { return sigmoid(x); });
}

Grid clamp(const Grid& a, double lo, double hi) {
    return map(a, [lo, hi](double x) { return std::clamp(x, lo, hi); });
}

Grid concat_channels(const Grid& a, const Grid& b) {
    require_same_extent(a, b, "concat_channels");
    const std::size_t ca = a.channels();
    const std::size_t cb = b.channels();
    Grid out(a.height(), a.width(), ca + cb);
    for (std::size_t p = 0; p < a.height() * a.width(); ++p) {
        for (std::size_t c = 0; c < ca; ++c) out.data()[p * (ca + cb) + c] = a.data()[p * ca + c];
        for (std::size_t c = 0; c < cb; ++c) out.data()[p * (ca + cb) + ca + c] = b.data()[p * cb + c];
    }
    return out;
}

double reduce_sum(const Grid& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return s;
}

double reduce_mean(const Grid& a) {
    if (a.empty()) return 0.0;
    return reduce_sum(a) / static_cast<double>(a.size());
}

double reduce_mean(const Grid& a, const BinaryMask& mask) {
    if (mask.height() != a.height() || mask.width() != a.width()) {
        throw DimensionError("reduce_mean: mask " + std::to_string(mask.height()) + "x" +
                             std::to_string(mask.width()) + " vs grid " + a.shape_string());
    }
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < a.height(); ++y) {
        for (std::size_t x = 0; x < a.width(); ++x) {
            if (!mask.at(y, x)) continue;
            for (std::size_t c = 0; c < a.channels(); ++c) s += a.at(y, x, c);
            n += a.channels();
        }
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
}

double dot(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

bool all_finite(const Grid& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace rsdflow
