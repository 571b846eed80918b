#pragma once

#include <cstddef>

#include "rsdflow/grid.hpp"
#include "rsdflow/mask.hpp"
#include "rsdflow/warp.hpp"

namespace rsdflow {

struct PhotometricConfig {
    double lambda_l1 = 0.15;
    double lambda_ssim = 0.85;
    std::size_t ssim_window = 7;
    double ssim_c1 = 0.01 * 0.01;
    double ssim_c2 = 0.03 * 0.03;
    std::size_t mask_pad = 20;
    // Use lambda_l1 * L1 - lambda_ssim * SSIM instead of the DSSIM form.
    // Not bounded below by zero.
    bool literal_eq4 = false;

    /// Throws ArgumentError on negative weights or an even / < 3 window.
    void validate() const;
};

/// Per-pixel, per-channel SSIM from uniform-window statistics. Windows are
/// clipped at the frame edge and use the in-frame pixel count.
Grid ssim_map(const Grid& a, const Grid& b, const PhotometricConfig& config);

/// SSIM whose window statistics only gather pixels inside `support`.
/// Values outside the support are not meaningful.
Grid ssim_map(const Grid& a, const Grid& b, const BinaryMask& support, const PhotometricConfig& config);

struct LossValue {
    double value = 0.0;
    bool empty_mask = false;
};

/// Mean over masked pixels and channels of
///   lambda_l1 * |warped - current| + lambda_ssim * (1 - SSIM) / 2,
/// with SSIM windows restricted to the mask, so pixels outside the mask
/// never influence the value.
/// An all-zero mask gives {0, empty_mask = true}.
LossValue masked_photometric_loss(const Grid& current, const Grid& warped, const BinaryMask& mask,
                                  const PhotometricConfig& config);

struct PhotometricEvaluation {
    LossValue loss;
    Grid grad_warped;  // d loss / d warped
};

/// Loss together with its gradient with respect to the warped image.
PhotometricEvaluation photometric_loss_and_gradient(const Grid& current, const Grid& warped,
                                                    const BinaryMask& mask,
                                                    const PhotometricConfig& config);

/// Filled bounding box of the set pixels grown by `pad` on every side and
/// clamped to the frame. Empty in, empty out.
BinaryMask mask_to_bbox(const BinaryMask& mask, std::size_t pad);

/// Gradient of masked_photometric_loss(current, warp(previous, flow), mask)
/// with respect to the flow. `mask` is used as given (no bbox expansion).
FlowField loss_gradient_wrt_flow(const Grid& current, const Grid& previous, const FlowField& flow,
                                 const BinaryMask& mask, const PhotometricConfig& config);

}  // namespace rsdflow
