#pragma once

#include <cstddef>
#include <utility>

#include "rsdflow/grid.hpp"
#include "rsdflow/mask.hpp"
#include "rsdflow/photometric.hpp"

namespace rsdflow {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) for intensities in [0, 1]; identical inputs give the cap.
double psnr(const Grid& a, const Grid& b);

/// Mean of ssim_map over all pixels and channels.
double mean_ssim(const Grid& a, const Grid& b, const PhotometricConfig& config = {});

/// |A and B| / |A or B|; two empty masks score 1.
double iou(const BinaryMask& pred, const BinaryMask& truth);

/// Mask pixels with a 4-neighbour outside the mask (frame edges do not count).
BinaryMask boundary_pixels(const BinaryMask& mask);

/// Default boundary tolerance: 0.8% of the image diagonal, rounded up.
std::size_t default_boundary_tolerance(std::size_t height, std::size_t width);

/// Boundary F-measure: a boundary pixel counts as matched when the other
/// boundary has a pixel within Euclidean distance `tolerance` (disk
/// dilation). Both empty -> 1, one empty -> 0.
double boundary_f(const BinaryMask& pred, const BinaryMask& truth, std::size_t tolerance);

/// Crops both grids to the (unpadded) bounding box of the mask. Throws
/// ArgumentError("nothing to crop") for an empty mask.
std::pair<Grid, Grid> crop_to_bbox_pair(const Grid& a, const Grid& b, const BinaryMask& mask);

}  // namespace rsdflow
