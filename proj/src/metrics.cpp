#include "rsdflow/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "rsdflow/errors.hpp"

namespace rsdflow {

double psnr(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "psnr");
    if (a.empty()) return kPsnrCap;
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double mean_ssim(const Grid& a, const Grid& b, const PhotometricConfig& config) {
    return reduce_mean(ssim_map(a, b, config));
}

namespace {

void check_masks(const BinaryMask& a, const BinaryMask& b, const char* op) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw DimensionError(std::string(op) + ": mask sizes differ");
    }
}

BinaryMask dilate_disk(const BinaryMask& m, std::size_t radius) {
    const auto r = static_cast<std::ptrdiff_t>(radius);
    const auto H = static_cast<std::ptrdiff_t>(m.height());
    const auto W = static_cast<std::ptrdiff_t>(m.width());
    BinaryMask out(m.height(), m.width());
    for (std::ptrdiff_t y = 0; y < H; ++y)
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            if (!m.at(y, x)) continue;
            for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
                for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
                    if (dy * dy + dx * dx > r * r) continue;
                    const std::ptrdiff_t yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < H && xx >= 0 && xx < W) out.set(yy, xx);
                }
        }
    return out;
}

std::size_t count_and(const BinaryMask& a, const BinaryMask& b) {
    std::size_t n = 0;
    for (std::size_t y = 0; y < a.height(); ++y)
        for (std::size_t x = 0; x < a.width(); ++x) n += (a.at(y, x) && b.at(y, x)) ? 1 : 0;
    return n;
}

}  // namespace

double iou(const BinaryMask& pred, const BinaryMask& truth) {
    check_masks(pred, truth, "iou");
    std::size_t inter = 0, uni = 0;
    for (std::size_t y = 0; y < pred.height(); ++y)
        for (std::size_t x = 0; x < pred.width(); ++x) {
            inter += (pred.at(y, x) && truth.at(y, x)) ? 1 : 0;
            uni += (pred.at(y, x) || truth.at(y, x)) ? 1 : 0;
        }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask boundary_pixels(const BinaryMask& mask) {
    BinaryMask b(mask.height(), mask.width());
    for (std::size_t y = 0; y < mask.height(); ++y)
        for (std::size_t x = 0; x < mask.width(); ++x) {
            if (!mask.at(y, x)) continue;
            const bool edge = (y > 0 && !mask.at(y - 1, x)) || (y + 1 < mask.height() && !mask.at(y + 1, x)) ||
                              (x > 0 && !mask.at(y, x - 1)) || (x + 1 < mask.width() && !mask.at(y, x + 1));
            if (edge) b.set(y, x);
        }
    return b;
}

std::size_t default_boundary_tolerance(std::size_t height, std::size_t width) {
    const double diag = std::hypot(static_cast<double>(height), static_cast<double>(width));
    return static_cast<std::size_t>(std::ceil(0.008 * diag));
}

double boundary_f(const BinaryMask& pred, const BinaryMask& truth, std::size_t tolerance) {
    check_masks(pred, truth, "boundary_f");
    const BinaryMask bp = boundary_pixels(pred);
    const BinaryMask bt = boundary_pixels(truth);
    const std::size_t np = bp.count(), nt = bt.count();
    if (np == 0 && nt == 0) return 1.0;
    if (np == 0 || nt == 0) return 0.0;
    const double precision = static_cast<double>(count_and(bp, dilate_disk(bt, tolerance))) / np;
    const double recall = static_cast<double>(count_and(bt, dilate_disk(bp, tolerance))) / nt;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

std::pair<Grid, Grid> crop_to_bbox_pair(const Grid& a, const Grid& b, const BinaryMask& mask) {
    require_same_shape(a, b, "crop_to_bbox_pair");
    if (mask.height() != a.height() || mask.width() != a.width()) {
        throw DimensionError("crop_to_bbox_pair: mask does not match grids");
    }
    const auto box = mask.bounds();
    if (!box) throw ArgumentError("nothing to crop");
    auto crop = [&](const Grid& g) {
        Grid out(box->rows(), box->cols(), g.channels());
        for (std::size_t y = 0; y < box->rows(); ++y)
            for (std::size_t x = 0; x < box->cols(); ++x)
                for (std::size_t c = 0; c < g.channels(); ++c)
                    out.at(y, x, c) = g.at(box->top + y, box->left + x, c);
        return out;
    };
    return {crop(a), crop(b)};
}

}  // namespace rsdflow
