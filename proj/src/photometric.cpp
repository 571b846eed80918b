#include "rsdflow/photometric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsdflow/errors.hpp"

namespace rsdflow {

void PhotometricConfig::validate() const {
    if (lambda_l1 < 0.0 || lambda_ssim < 0.0) throw ArgumentError("photometric weights must be >= 0");
    if (ssim_window < 3 || ssim_window % 2 == 0) {
        throw ArgumentError("ssim window must be odd and >= 3, got " + std::to_string(ssim_window));
    }
    if (ssim_c1 <= 0.0 || ssim_c2 <= 0.0) throw ArgumentError("ssim stabilizers must be > 0");
}

namespace {

// Sum over the clipped (2r+1)^2 window, done separably. Symmetric windows
// make this operator self-adjoint.
Grid box_sum(const Grid& g, std::size_t r) {
    const std::size_t H = g.height(), W = g.width(), C = g.channels();
    Grid rows(H, W, C);
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const std::size_t x0 = x >= r ? x - r : 0;
            const std::size_t x1 = std::min(W - 1, x + r);
            for (std::size_t c = 0; c < C; ++c) {
                double s = 0.0;
                for (std::size_t k = x0; k <= x1; ++k) s += g.at(y, k, c);
                rows.at(y, x, c) = s;
            }
        }
    }
    Grid out(H, W, C);
    for (std::size_t y = 0; y < H; ++y) {
        const std::size_t y0 = y >= r ? y - r : 0;
        const std::size_t y1 = std::min(H - 1, y + r);
        for (std::size_t x = 0; x < W; ++x) {
            for (std::size_t c = 0; c < C; ++c) {
                double s = 0.0;
                for (std::size_t k = y0; k <= y1; ++k) s += rows.at(k, x, c);
                out.at(y, x, c) = s;
            }
        }
    }
    return out;
}

// Window statistics restricted to a support: each window averages only the
// pixels where `weight` is 1. A full support reproduces the clipped box mean.
class WindowAverager {
public:
    WindowAverager(const Grid& weight, std::size_t r) : weight_(weight), r_(r), count_(box_sum(weight, r)) {}

    Grid mean(const Grid& g) const {
        Grid s = box_sum(apply_weight(g), r_);
        for (std::size_t p = 0; p < count_.size(); ++p) {
            const double n = count_.data()[p];
            for (std::size_t c = 0; c < g.channels(); ++c) {
                double& v = s.data()[p * g.channels() + c];
                v = n > 0.0 ? v / n : 0.0;
            }
        }
        return s;
    }

    Grid mean_adjoint(const Grid& g) const {
        Grid scaled = g;
        for (std::size_t p = 0; p < count_.size(); ++p) {
            const double n = count_.data()[p];
            for (std::size_t c = 0; c < g.channels(); ++c) {
                double& v = scaled.data()[p * g.channels() + c];
                v = n > 0.0 ? v / n : 0.0;
            }
        }
        return apply_weight(box_sum(scaled, r_));
    }

private:
    Grid apply_weight(const Grid& g) const {
        Grid out = g;
        for (std::size_t p = 0; p < weight_.size(); ++p)
            for (std::size_t c = 0; c < g.channels(); ++c) out.data()[p * g.channels() + c] *= weight_.data()[p];
        return out;
    }

    const Grid& weight_;
    std::size_t r_;
    Grid count_;
};

struct Moments {
    Grid mu_a, mu_b, e_aa, e_bb, e_ab;
};

Moments local_moments(const Grid& a, const Grid& b, const WindowAverager& avg) {
    return {avg.mean(a), avg.mean(b), avg.mean(mul(a, a)), avg.mean(mul(b, b)), avg.mean(mul(a, b))};
}

struct SsimTerms {
    double ssim;
    double a1, a2, b1, b2;
};

SsimTerms ssim_terms(double mu_a, double mu_b, double e_aa, double e_bb, double e_ab,
                     const PhotometricConfig& cfg) {
    const double s_aa = e_aa - mu_a * mu_a;
    const double s_bb = e_bb - mu_b * mu_b;
    const double s_ab = e_ab - mu_a * mu_b;
    SsimTerms t{};
    t.a1 = 2.0 * mu_a * mu_b + cfg.ssim_c1;
    t.a2 = 2.0 * s_ab + cfg.ssim_c2;
    t.b1 = mu_a * mu_a + mu_b * mu_b + cfg.ssim_c1;
    t.b2 = s_aa + s_bb + cfg.ssim_c2;
    t.ssim = (t.a1 * t.a2) / (t.b1 * t.b2);
    return t;
}

void check_loss_inputs(const Grid& current, const Grid& warped, const BinaryMask& mask,
                       const PhotometricConfig& config) {
    config.validate();
    require_same_shape(current, warped, "photometric loss");
    if (mask.height() != current.height() || mask.width() != current.width()) {
        throw DimensionError("photometric loss: mask does not match frame " + current.shape_string());
    }
}

double pixel_term(double l1, double ssim, const PhotometricConfig& cfg) {
    if (cfg.literal_eq4) return cfg.lambda_l1 * l1 - cfg.lambda_ssim * ssim;
    return cfg.lambda_l1 * l1 + cfg.lambda_ssim * 0.5 * (1.0 - ssim);
}

// d(pixel term)/d(SSIM).
double ssim_weight(const PhotometricConfig& cfg) {
    return cfg.literal_eq4 ? -cfg.lambda_ssim : -0.5 * cfg.lambda_ssim;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

namespace {

Grid ssim_from_moments(const Moments& m, const PhotometricConfig& config) {
    Grid out(m.mu_a.height(), m.mu_a.width(), m.mu_a.channels());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = ssim_terms(m.mu_a.data()[i], m.mu_b.data()[i], m.e_aa.data()[i],
                                   m.e_bb.data()[i], m.e_ab.data()[i], config)
                            .ssim;
    }
    return out;
}

}  // namespace

Grid ssim_map(const Grid& a, const Grid& b, const PhotometricConfig& config) {
    config.validate();
    require_same_shape(a, b, "ssim_map");
    const Grid full(a.height(), a.width(), 1, 1.0);
    return ssim_from_moments(local_moments(a, b, WindowAverager(full, config.ssim_window / 2)), config);
}

Grid ssim_map(const Grid& a, const Grid& b, const BinaryMask& support, const PhotometricConfig& config) {
    config.validate();
    require_same_shape(a, b, "ssim_map");
    if (support.height() != a.height() || support.width() != a.width()) {
        throw DimensionError("ssim_map: support does not match " + a.shape_string());
    }
    const Grid weight = support.to_grid();
    return ssim_from_moments(local_moments(a, b, WindowAverager(weight, config.ssim_window / 2)), config);
}

LossValue masked_photometric_loss(const Grid& current, const Grid& warped, const BinaryMask& mask,
                                  const PhotometricConfig& config) {
    check_loss_inputs(current, warped, mask, config);
    const std::size_t n = mask.count();
    if (n == 0) return {0.0, true};
    const bool need_ssim = config.lambda_ssim != 0.0;
    const Grid ssim = need_ssim ? ssim_map(current, warped, mask, config) : Grid();
    const std::size_t C = current.channels();
    double total = 0.0;
    for (std::size_t y = 0; y < current.height(); ++y) {
        for (std::size_t x = 0; x < current.width(); ++x) {
            if (!mask.at(y, x)) continue;
            for (std::size_t c = 0; c < C; ++c) {
                const double l1 = std::abs(warped.at(y, x, c) - current.at(y, x, c));
                total += pixel_term(l1, need_ssim ? ssim.at(y, x, c) : 1.0, config);
            }
        }
    }
    return {total / static_cast<double>(n * C), false};
}

PhotometricEvaluation photometric_loss_and_gradient(const Grid& current, const Grid& warped,
                                                    const BinaryMask& mask,
                                                    const PhotometricConfig& config) {
    check_loss_inputs(current, warped, mask, config);
    PhotometricEvaluation ev{{}, Grid(current.height(), current.width(), current.channels())};
    const std::size_t n = mask.count();
    if (n == 0) {
        ev.loss = {0.0, true};
        return ev;
    }
    const std::size_t H = current.height(), W = current.width(), C = current.channels();
    const double norm = 1.0 / static_cast<double>(n * C);
    const bool need_ssim = config.lambda_ssim != 0.0;
    const std::size_t r = config.ssim_window / 2;

    // Upstream weights on the three moments involving the warped image b.
    Grid g_mu(H, W, C), g_bb(H, W, C), g_ab(H, W, C);
    const Grid weight = mask.to_grid();
    const WindowAverager avg(weight, r);
    Moments m;
    if (need_ssim) m = local_moments(current, warped, avg);

    double total = 0.0;
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            if (!mask.at(y, x)) continue;
            for (std::size_t c = 0; c < C; ++c) {
                const double diff = warped.at(y, x, c) - current.at(y, x, c);
                double s = 1.0;
                if (need_ssim) {
                    const std::size_t i = (y * W + x) * C + c;
                    const double mu_a = m.mu_a.data()[i];
                    const double mu_b = m.mu_b.data()[i];
                    const SsimTerms t = ssim_terms(mu_a, mu_b, m.e_aa.data()[i], m.e_bb.data()[i],
                                                   m.e_ab.data()[i], config);
                    s = t.ssim;
                    const double up = norm * ssim_weight(config) * s;
                    g_mu.data()[i] = up * (2.0 * mu_a / t.a1 - 2.0 * mu_b / t.b1 -
                                           2.0 * mu_a / t.a2 + 2.0 * mu_b / t.b2);
                    g_bb.data()[i] = -up / t.b2;
                    g_ab.data()[i] = up * 2.0 / t.a2;
                }
                total += pixel_term(std::abs(diff), s, config);
                ev.grad_warped.at(y, x, c) += norm * config.lambda_l1 * sign(diff);
            }
        }
    }
    ev.loss = {total * norm, false};

    if (need_ssim) {
        const Grid d_mu = avg.mean_adjoint(g_mu);
        const Grid d_bb = avg.mean_adjoint(g_bb);
        const Grid d_ab = avg.mean_adjoint(g_ab);
        for (std::size_t i = 0; i < ev.grad_warped.size(); ++i) {
            ev.grad_warped.data()[i] += d_mu.data()[i] + 2.0 * warped.data()[i] * d_bb.data()[i] +
                                        current.data()[i] * d_ab.data()[i];
        }
    }
    return ev;
}

BinaryMask mask_to_bbox(const BinaryMask& mask, std::size_t pad) {
    const auto b = mask.bounds();
    if (!b) return BinaryMask(mask.height(), mask.width());
    BoxRegion grown{b->top >= pad ? b->top - pad : 0, b->left >= pad ? b->left - pad : 0,
                    std::min(mask.height() - 1, b->bottom + pad),
                    std::min(mask.width() - 1, b->right + pad)};
    return BinaryMask::box(mask.height(), mask.width(), grown);
}

FlowField loss_gradient_wrt_flow(const Grid& current, const Grid& previous, const FlowField& flow,
                                 const BinaryMask& mask, const PhotometricConfig& config) {
    const Grid warped = warp(previous, flow);
    const PhotometricEvaluation ev = photometric_loss_and_gradient(current, warped, mask, config);
    if (ev.loss.empty_mask) return FlowField(flow.height(), flow.width());
    return warp_backward(previous, flow, ev.grad_warped).flow;
}

}  // namespace rsdflow
