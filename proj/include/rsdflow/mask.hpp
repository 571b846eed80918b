#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace rsdflow {

class Grid;

/// Inclusive pixel rectangle.
struct BoxRegion {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t bottom = 0;
    std::size_t right = 0;

    std::size_t rows() const { return bottom - top + 1; }
    std::size_t cols() const { return right - left + 1; }
    friend bool operator==(const BoxRegion&, const BoxRegion&) = default;
};

/// Per-pixel {0, 1} mask.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(std::size_t height, std::size_t width, bool fill = false);

    /// M(u,v) = (P(u,v) > threshold), channel 0 of the probability map.
    static BinaryMask from_probability(const Grid& probability, double threshold = 0.5);
    /// Pixels whose label equals `label`.
    static BinaryMask from_labels(const std::vector<int>& labels, std::size_t height,
                                  std::size_t width, int label);
    static BinaryMask box(std::size_t height, std::size_t width, const BoxRegion& region);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }

    bool at(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
    void set(std::size_t y, std::size_t x, bool v = true) { bits_[y * width_ + x] = v ? 1 : 0; }

    std::size_t count() const;
    bool any() const { return count() > 0; }
    std::optional<BoxRegion> bounds() const;

    /// 1-channel Grid of 0.0 / 1.0.
    Grid to_grid() const;

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> bits_;
};

}  // namespace rsdflow
