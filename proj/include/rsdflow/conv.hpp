#pragma once

#include <cstddef>
#include <vector>

#include "rsdflow/grid.hpp"

namespace rsdflow {

/// Convolution weight bank, laid out [out][in][kh][kw]. Kernel sides are odd
/// so zero "same" padding is symmetric. An empty bias means no bias term.
class ConvKernel {
public:
    ConvKernel() = default;
    ConvKernel(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
               std::size_t kernel_w, bool with_bias = true);

    std::size_t in_channels() const { return in_; }
    std::size_t out_channels() const { return out_; }
    std::size_t kernel_h() const { return kh_; }
    std::size_t kernel_w() const { return kw_; }
    bool has_bias() const { return !bias_.empty(); }

    double& weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
        return weights_[((o * in_ + i) * kh_ + ky) * kw_ + kx];
    }
    double weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
        return weights_[((o * in_ + i) * kh_ + ky) * kw_ + kx];
    }

    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }
    std::vector<double>& bias() { return bias_; }
    const std::vector<double>& bias() const { return bias_; }

    /// Number of scalars (weights + bias).
    std::size_t parameter_count() const { return weights_.size() + bias_.size(); }
    /// Same shape, all zero.
    ConvKernel zeros_like() const;

    /// 1x1 (or kxk with only the centre tap set) identity over channels.
    static ConvKernel identity(std::size_t channels, std::size_t kernel_size = 1, bool with_bias = true);

    friend bool operator==(const ConvKernel&, const ConvKernel&) = default;

private:
    std::size_t in_ = 0;
    std::size_t out_ = 0;
    std::size_t kh_ = 0;
    std::size_t kw_ = 0;
    std::vector<double> weights_;
    std::vector<double> bias_;
};

struct ConvGradient {
    Grid input;
    ConvKernel kernel;
};

/// Stride-1 cross-correlation with zero same-padding plus bias.
Grid conv2d(const Grid& input, const ConvKernel& kernel);

/// Adjoint of conv2d with respect to input and to kernel weights/bias.
ConvGradient conv2d_backward(const Grid& input, const ConvKernel& kernel, const Grid& upstream);

/// Bilinear upsampling by an integer factor with half-pixel centres: output
/// pixel (y, x) samples input at ((y + 0.5) / s - 0.5, (x + 0.5) / s - 0.5),
/// clamped to the input frame.
Grid bilinear_resize(const Grid& input, std::size_t scale);

/// Adjoint of bilinear_resize. `upstream` has the upsampled shape.
Grid bilinear_resize_backward(const Grid& upstream, std::size_t input_height,
                              std::size_t input_width, std::size_t scale);

}  // namespace rsdflow
