#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rsdflow {

class BinaryMask;

/// Dense height x width x channels array of doubles, row-major with the
/// channel index fastest (HWC). Images, feature maps, flow and probability
/// maps all live in a Grid.
class Grid {
public:
    Grid() = default;
    Grid(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
    Grid(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t y, std::size_t x, std::size_t c = 0) {
        return data_[(y * width_ + x) * channels_ + c];
    }
    double at(std::size_t y, std::size_t x, std::size_t c = 0) const {
        return data_[(y * width_ + x) * channels_ + c];
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    bool same_shape(const Grid& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }
    bool same_extent(const Grid& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }
    std::string shape_string() const;

    /// Single channel view copied out.
    Grid channel(std::size_t c) const;

    friend bool operator==(const Grid& a, const Grid& b) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 0;
    std::vector<double> data_;
};

void require_same_shape(const Grid& a, const Grid& b, const char* op);
void require_same_extent(const Grid& a, const Grid& b, const char* op);

// Elementwise arithmetic. Shapes must match exactly.
Grid add(const Grid& a, const Grid& b);
Grid sub(const Grid& a, const Grid& b);
Grid mul(const Grid& a, const Grid& b);
Grid abs(const Grid& a);
Grid scale(const Grid& a, double s);
Grid add_scalar(const Grid& a, double s);
Grid sigmoid(const Grid& a);
Grid clamp(const Grid& a, double lo, double hi);

/// Channel concatenation of grids with equal extent.
Grid concat_channels(const Grid& a, const Grid& b);

double reduce_sum(const Grid& a);
double reduce_mean(const Grid& a);
/// Mean over all channels of the pixels where mask is set. An all-zero mask
/// yields 0.
double reduce_mean(const Grid& a, const BinaryMask& mask);
double dot(const Grid& a, const Grid& b);

bool all_finite(const Grid& a);

double sigmoid(double x);

}  // namespace rsdflow
