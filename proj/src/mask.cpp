#include "rsdflow/mask.hpp"

#include <algorithm>

#include "rsdflow/errors.hpp"
#include "rsdflow/grid.hpp"

namespace rsdflow {

BinaryMask::BinaryMask(std::size_t height, std::size_t width, bool fill)
    : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}

BinaryMask BinaryMask::from_probability(const Grid& probability, double threshold) {
    BinaryMask m(probability.height(), probability.width());
    for (std::size_t y = 0; y < m.height_; ++y)
        for (std::size_t x = 0; x < m.width_; ++x) m.set(y, x, probability.at(y, x, 0) > threshold);
    return m;
}

BinaryMask BinaryMask::from_labels(const std::vector<int>& labels, std::size_t height,
                                   std::size_t width, int label) {
    if (labels.size() != height * width) {
        throw DimensionError("label image size does not match " + std::to_string(height) + "x" +
                             std::to_string(width));
    }
    BinaryMask m(height, width);
    for (std::size_t i = 0; i < labels.size(); ++i) m.bits_[i] = labels[i] == label ? 1 : 0;
    return m;
}

BinaryMask BinaryMask::box(std::size_t height, std::size_t width, const BoxRegion& region) {
    BinaryMask m(height, width);
    for (std::size_t y = region.top; y <= region.bottom && y < height; ++y)
        for (std::size_t x = region.left; x <= region.right && x < width; ++x) m.set(y, x);
    return m;
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::optional<BoxRegion> BinaryMask::bounds() const {
    std::optional<BoxRegion> box;
    for (std::size_t y = 0; y < height_; ++y) {
        for (std::size_t x = 0; x < width_; ++x) {
            if (!at(y, x)) continue;
            if (!box) {
                box = BoxRegion{y, x, y, x};
            } else {
                box->top = std::min(box->top, y);
                box->bottom = std::max(box->bottom, y);
                box->left = std::min(box->left, x);
                box->right = std::max(box->right, x);
            }
        }
    }
    return box;
}

Grid BinaryMask::to_grid() const {
    Grid g(height_, width_, 1);
    for (std::size_t i = 0; i < bits_.size(); ++i) g.data()[i] = bits_[i] ? 1.0 : 0.0;
    return g;
}

}  // namespace rsdflow
