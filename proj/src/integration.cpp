#include "rsdflow/integration.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "rsdflow/errors.hpp"

namespace rsdflow {

IntegrationParams IntegrationParams::initial(std::size_t frame_channels) {
    IntegrationParams p{ConvKernel::identity(1, 3), ConvKernel(1, 1, 3, 3), ConvKernel(1, 1, 3, 3),
                        ConvKernel(frame_channels, 1, 3, 3), ConvKernel(frame_channels, 1, 3, 3)};
    return p;
}

std::vector<ConvKernel*> IntegrationParams::kernels() {
    return {&w_x, &w_h1, &w_h2, &w_r1, &w_r2};
}

std::vector<const ConvKernel*> IntegrationParams::kernels() const {
    return {&w_x, &w_h1, &w_h2, &w_r1, &w_r2};
}

std::size_t IntegrationParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto* k : kernels()) n += k->parameter_count();
    return n;
}

std::vector<double> IntegrationParams::to_vector() const {
    std::vector<double> v;
    for (const auto* k : kernels()) {
        v.insert(v.end(), k->weights().begin(), k->weights().end());
        v.insert(v.end(), k->bias().begin(), k->bias().end());
    }
    return v;
}

void IntegrationParams::assign(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw DimensionError("integration params size mismatch");
    auto it = flat.begin();
    for (auto* k : kernels()) {
        for (auto* part : {&k->weights(), &k->bias()}) {
            std::copy_n(it, part->size(), part->begin());
            it += static_cast<std::ptrdiff_t>(part->size());
        }
    }
}

std::size_t HistoryState::available_depth() const {
    if (!p1 || !frame1) return 0;
    if (!p2 || !frame2 || !older_flow) return 1;
    return 2;
}

IntegrationInputs prepare_integration_inputs(const Grid& frame, const Grid& prob,
                                             const HistoryState& history, const FlowField& flow,
                                             std::size_t depth) {
    if (depth > 2) throw ArgumentError("history depth must be 0, 1 or 2");
    if (prob.channels() != 1) throw DimensionError("probability map must have 1 channel");
    require_same_extent(frame, prob, "integrate");
    if (depth > history.available_depth()) {
        throw ArgumentError("history holds " + std::to_string(history.available_depth()) +
                            " frames, depth " + std::to_string(depth) + " requested");
    }
    IntegrationInputs in;
    in.prob = prob;
    in.depth = depth;
    if (depth >= 1) {
        require_same_shape(*history.p1, prob, "integrate history p1");
        require_same_shape(*history.frame1, frame, "integrate history frame1");
        in.warped_p1 = warp(*history.p1, flow);
        in.error1 = abs(sub(frame, warp(*history.frame1, flow)));
    }
    if (depth >= 2) {
        require_same_shape(*history.p2, prob, "integrate history p2");
        require_same_shape(*history.frame2, frame, "integrate history frame2");
        in.warped_p2 = warp_chain(*history.p2, *history.older_flow, flow);
        in.error2 = abs(sub(frame, warp_chain(*history.frame2, *history.older_flow, flow)));
    }
    return in;
}

namespace {

Grid gate_from_logits(const Grid& r) {
    Grid g(r.height(), r.width(), 1);
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = 1.0 - sigmoid(r.data()[i]);
    return g;
}

}  // namespace

IntegrationForward integration_forward(const IntegrationParams& params,
                                       const IntegrationInputs& inputs, bool use_gates) {
    IntegrationForward f;
    f.x = conv2d(inputs.prob, params.w_x);
    f.pre_clamp = f.x;
    auto add_history = [&](const Grid& warped, const Grid& error, const ConvKernel& wh,
                           const ConvKernel& wr, Grid& h, Grid& r, Grid& gate) {
        h = conv2d(warped, wh);
        if (use_gates) {
            r = conv2d(error, wr);
            gate = gate_from_logits(r);
        } else {
            gate = Grid(h.height(), h.width(), 1, 1.0);
        }
        f.pre_clamp = add(f.pre_clamp, mul(h, gate));
    };
    if (inputs.depth >= 1) add_history(inputs.warped_p1, inputs.error1, params.w_h1, params.w_r1, f.h1, f.r1, f.gate1);
    if (inputs.depth >= 2) add_history(inputs.warped_p2, inputs.error2, params.w_h2, params.w_r2, f.h2, f.r2, f.gate2);
    f.output = clamp(f.pre_clamp, 0.0, 1.0);
    return f;
}

Grid integrate(const IntegrationParams& params, const Grid& frame, const Grid& prob,
               const HistoryState& history, const FlowField& flow,
               const IntegrationOptions& options) {
    const IntegrationInputs in = prepare_integration_inputs(frame, prob, history, flow, options.depth);
    return integration_forward(params, in, options.use_gates).output;
}

IntegrationParams integration_backward(const IntegrationParams& params,
                                       const IntegrationInputs& inputs,
                                       const IntegrationForward& forward, const Grid& grad_output,
                                       bool use_gates) {
    require_same_shape(grad_output, forward.output, "integration_backward");
    Grid d_pre = grad_output;
    for (std::size_t i = 0; i < d_pre.size(); ++i) {
        const double v = forward.pre_clamp.data()[i];
        if (v < 0.0 || v > 1.0) d_pre.data()[i] = 0.0;
    }

    IntegrationParams g{params.w_x.zeros_like(), params.w_h1.zeros_like(), params.w_h2.zeros_like(),
                        params.w_r1.zeros_like(), params.w_r2.zeros_like()};
    g.w_x = conv2d_backward(inputs.prob, params.w_x, d_pre).kernel;

    auto history_grad = [&](const Grid& warped, const Grid& error, const ConvKernel& wh,
                            const ConvKernel& wr, const Grid& h, const Grid& r, const Grid& gate,
                            ConvKernel& gh, ConvKernel& gr) {
        gh = conv2d_backward(warped, wh, mul(d_pre, gate)).kernel;
        if (!use_gates) return;
        Grid d_r(r.height(), r.width(), 1);
        for (std::size_t i = 0; i < d_r.size(); ++i) {
            const double s = sigmoid(r.data()[i]);
            d_r.data()[i] = -d_pre.data()[i] * h.data()[i] * s * (1.0 - s);
        }
        gr = conv2d_backward(error, wr, d_r).kernel;
    };
    if (inputs.depth >= 1)
        history_grad(inputs.warped_p1, inputs.error1, params.w_h1, params.w_r1, forward.h1,
                     forward.r1, forward.gate1, g.w_h1, g.w_r1);
    if (inputs.depth >= 2)
        history_grad(inputs.warped_p2, inputs.error2, params.w_h2, params.w_r2, forward.h2,
                     forward.r2, forward.gate2, g.w_h2, g.w_r2);
    return g;
}

double bce_loss(const Grid& prediction, const BinaryMask& target, double eps) {
    if (prediction.height() != target.height() || prediction.width() != target.width() ||
        prediction.channels() != 1) {
        throw DimensionError("bce_loss: prediction " + prediction.shape_string() +
                             " does not match target");
    }
    double total = 0.0;
    for (std::size_t y = 0; y < prediction.height(); ++y)
        for (std::size_t x = 0; x < prediction.width(); ++x) {
            const double p = std::clamp(prediction.at(y, x), eps, 1.0 - eps);
            total -= target.at(y, x) ? std::log(p) : std::log(1.0 - p);
        }
    return total / static_cast<double>(prediction.size());
}

Grid bce_gradient(const Grid& prediction, const BinaryMask& target, double eps) {
    if (prediction.height() != target.height() || prediction.width() != target.width() ||
        prediction.channels() != 1) {
        throw DimensionError("bce_gradient: shape mismatch");
    }
    Grid g(prediction.height(), prediction.width(), 1);
    const double n = static_cast<double>(prediction.size());
    for (std::size_t y = 0; y < prediction.height(); ++y)
        for (std::size_t x = 0; x < prediction.width(); ++x) {
            const double p = prediction.at(y, x);
            if (p < eps || p > 1.0 - eps) continue;
            g.at(y, x) = (target.at(y, x) ? -1.0 / p : 1.0 / (1.0 - p)) / n;
        }
    return g;
}

TrainingResult train_integration(const IntegrationParams& params,
                                 std::span<const IntegrationSample> samples,
                                 const TrainingConfig& config) {
    if (samples.empty()) throw ArgumentError("train_integration: empty dataset");
    if (config.lr < 0.0) throw ArgumentError("train_integration: lr must be >= 0");

    std::vector<IntegrationInputs> inputs;
    inputs.reserve(samples.size());
    for (const auto& s : samples)
        inputs.push_back(prepare_integration_inputs(s.frame, s.prob, s.history, s.flow,
                                                    config.options.depth));

    TrainingResult result{params, {}};
    const double inv = 1.0 / static_cast<double>(samples.size());
    auto epoch = [&](bool with_grad, std::vector<double>& grad) {
        double loss = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const IntegrationForward f =
                integration_forward(result.params, inputs[i], config.options.use_gates);
            loss += bce_loss(f.output, samples[i].target);
            if (!with_grad) continue;
            const IntegrationParams g =
                integration_backward(result.params, inputs[i], f,
                                     bce_gradient(f.output, samples[i].target),
                                     config.options.use_gates);
            const std::vector<double> flat = g.to_vector();
            for (std::size_t k = 0; k < flat.size(); ++k) grad[k] += flat[k];
        }
        return loss * inv;
    };

    for (std::size_t e = 0; e < config.epochs; ++e) {
        std::vector<double> grad(result.params.parameter_count(), 0.0);
        result.losses.push_back(epoch(true, grad));
        if (config.lr == 0.0) continue;
        std::vector<double> flat = result.params.to_vector();
        const std::size_t first = config.freeze_x ? result.params.w_x.parameter_count() : 0;
        for (std::size_t k = first; k < flat.size(); ++k) flat[k] -= config.lr * grad[k] * inv;
        result.params.assign(flat);
    }
    std::vector<double> unused;
    result.losses.push_back(epoch(false, unused));
    return result;
}

namespace {

constexpr char kMagic[4] = {'R', 'S', 'D', 'I'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint64_t take(std::size_t bytes) {
        if (pos_ + bytes > data_.size()) throw FormatError("integration blob truncated");
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < bytes; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
        pos_ += bytes;
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
    double f64() { return std::bit_cast<double>(take(8)); }
    bool done() const { return pos_ == data_.size(); }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const IntegrationParams& params) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kVersion);
    const auto ks = params.kernels();
    put_u32(out, static_cast<std::uint32_t>(ks.size()));
    for (const auto* k : ks) {
        put_u32(out, static_cast<std::uint32_t>(k->in_channels()));
        put_u32(out, static_cast<std::uint32_t>(k->out_channels()));
        put_u32(out, static_cast<std::uint32_t>(k->kernel_h()));
        put_u32(out, static_cast<std::uint32_t>(k->kernel_w()));
        put_u32(out, k->has_bias() ? 1 : 0);
        for (double w : k->weights()) put_f64(out, w);
        for (double b : k->bias()) put_f64(out, b);
    }
    return out;
}

IntegrationParams deserialize_integration(std::span<const std::uint8_t> blob) {
    if (blob.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), blob.begin())) {
        throw FormatError("not an integration parameter blob (bad magic)");
    }
    Reader r(blob.subspan(4));
    if (const auto v = r.u32(); v != kVersion) {
        throw FormatError("unsupported integration blob version " + std::to_string(v));
    }
    if (const auto n = r.u32(); n != 5) {
        throw FormatError("integration blob holds " + std::to_string(n) + " kernels, expected 5");
    }
    IntegrationParams p;
    for (auto* k : p.kernels()) {
        const std::uint32_t in = r.u32(), out = r.u32(), kh = r.u32(), kw = r.u32();
        const std::uint32_t has_bias = r.u32();
        if (kh % 2 == 0 || kw % 2 == 0 || in == 0 || out == 0 || in * out * kh * kw > (1u << 24)) {
            throw FormatError("integration blob has an invalid kernel header");
        }
        *k = ConvKernel(in, out, kh, kw, has_bias != 0);
        for (double& w : k->weights()) w = r.f64();
        for (double& b : k->bias()) b = r.f64();
    }
    if (!r.done()) throw FormatError("trailing bytes after integration blob");
    return p;
}

void save_integration(const IntegrationParams& params, const std::filesystem::path& path) {
    const auto blob = serialize(params);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
}

IntegrationParams load_integration(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    const std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return deserialize_integration(blob);
}

}  // namespace rsdflow

namespace rsdflow {

LabelImage merge_object_maps(std::span<const Grid> maps) {
    if (maps.empty()) throw ArgumentError("merge_object_maps: no maps");
    const std::size_t H = maps[0].height(), W = maps[0].width();
    LabelImage out{H, W, std::vector<int>(H * W, 0)};
    for (const auto& m : maps) {
        if (m.height() != H || m.width() != W || m.channels() != 1) {
            throw DimensionError("merge_object_maps: expected " + maps[0].shape_string() + ", got " + m.shape_string());
        }
    }
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            double best = 0.5;
            for (std::size_t k = 0; k < maps.size(); ++k) {
                const double v = maps[k].at(y, x, 0);
                if (v >= best && (out.labels[y * W + x] == 0 || v > best)) {
                    best = v;
                    out.labels[y * W + x] = static_cast<int>(k + 1);
                }
            }
        }
    return out;
}

}  // namespace rsdflow
