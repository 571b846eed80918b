#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rsdflow/conv.hpp"
#include "rsdflow/grid.hpp"
#include "rsdflow/mask.hpp"
#include "rsdflow/sequence.hpp"
#include "rsdflow/warp.hpp"

namespace rsdflow {

/// Refinement head weights. All kernels are 3x3; w_x and the w_h pair map one
/// probability channel to one, the w_r pair map the per-channel frame
/// reconstruction error to one gate logit.
struct IntegrationParams {
    ConvKernel w_x;
    ConvKernel w_h1;
    ConvKernel w_h2;
    ConvKernel w_r1;
    ConvKernel w_r2;

    /// w_x is a centre-tap identity, everything else zero: the untrained head
    /// passes P_t through unchanged.
    static IntegrationParams initial(std::size_t frame_channels = 3);

    std::vector<ConvKernel*> kernels();
    std::vector<const ConvKernel*> kernels() const;
    std::size_t parameter_count() const;
    std::vector<double> to_vector() const;
    void assign(std::span<const double> flat);

    friend bool operator==(const IntegrationParams&, const IntegrationParams&) = default;
};

/// Up to two previous frames with their probability maps. p1/frame1 are
/// t-1, p2/frame2 are t-2 and older_flow is O_{t-1,t-2}.
struct HistoryState {
    std::optional<Grid> p1;
    std::optional<Grid> frame1;
    std::optional<Grid> p2;
    std::optional<Grid> frame2;
    std::optional<FlowField> older_flow;

    /// Number of usable history frames (0, 1 or 2).
    std::size_t available_depth() const;
};

struct IntegrationOptions {
    std::size_t depth = 2;
    /// false: gates fixed to 1 (P = x + h1 + h2).
    bool use_gates = true;
};

/// Inputs of the head that do not depend on its weights.
struct IntegrationInputs {
    Grid prob;        // P_t
    Grid warped_p1;   // W(P_{t-1}, O_{t,t-1})
    Grid warped_p2;   // W(W(P_{t-2}, O_{t-1,t-2}), O_{t,t-1})
    Grid error1;      // |I_t - W(I_{t-1}, O_{t,t-1})| per channel
    Grid error2;
    std::size_t depth = 0;
};

IntegrationInputs prepare_integration_inputs(const Grid& frame, const Grid& prob,
                                             const HistoryState& history, const FlowField& flow,
                                             std::size_t depth);

struct IntegrationForward {
    Grid x;
    Grid h1, h2;
    Grid r1, r2;
    Grid gate1, gate2;  // 1 - sigmoid(r)
    Grid pre_clamp;
    Grid output;
};

IntegrationForward integration_forward(const IntegrationParams& params,
                                       const IntegrationInputs& inputs, bool use_gates);

/// P = x + h1 (1 - sigmoid(r1)) + h2 (1 - sigmoid(r2)), clamped to [0, 1].
/// With depth 0 only the x path is used.
Grid integrate(const IntegrationParams& params, const Grid& frame, const Grid& prob,
               const HistoryState& history, const FlowField& flow,
               const IntegrationOptions& options = {});

/// Gradient of a scalar loss through the head given d loss / d output.
IntegrationParams integration_backward(const IntegrationParams& params,
                                       const IntegrationInputs& inputs,
                                       const IntegrationForward& forward, const Grid& grad_output,
                                       bool use_gates);

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross entropy; predictions are clamped to [eps, 1 - eps].
double bce_loss(const Grid& prediction, const BinaryMask& target, double eps = kBceEpsilon);
/// d bce / d prediction (zero where the clamp is active).
Grid bce_gradient(const Grid& prediction, const BinaryMask& target, double eps = kBceEpsilon);

struct IntegrationSample {
    Grid frame;
    Grid prob;
    HistoryState history;
    FlowField flow;
    BinaryMask target;
};

struct TrainingConfig {
    std::size_t epochs = 100;
    double lr = 1.0;
    IntegrationOptions options;
    /// Keep w_x fixed, so the trained head still reduces to P_t at depth 0.
    bool freeze_x = false;
};

struct TrainingResult {
    IntegrationParams params;
    /// Mean BCE before each epoch's update, then after the last one.
    std::vector<double> losses;
};

/// Full-batch gradient descent on mean BCE over the samples.
TrainingResult train_integration(const IntegrationParams& params,
                                 std::span<const IntegrationSample> samples,
                                 const TrainingConfig& config);

/// Little-endian blob: "RSDI", u32 version, u32 kernel count, then per kernel
/// u32 in/out/kh/kw/has_bias followed by f64 weights and bias.
std::vector<std::uint8_t> serialize(const IntegrationParams& params);
IntegrationParams deserialize_integration(std::span<const std::uint8_t> blob);
void save_integration(const IntegrationParams& params, const std::filesystem::path& path);
IntegrationParams load_integration(const std::filesystem::path& path);

/// Per-pixel argmax over per-object probability maps (object k is label
/// k + 1); pixels where no map reaches 0.5 become background.
LabelImage merge_object_maps(std::span<const Grid> maps);

}  // namespace rsdflow
