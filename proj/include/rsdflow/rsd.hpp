#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsdflow {

struct Evaluation {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Differentiable scalar objective over a flat parameter vector. Objectives
/// driven by RSD must be nonnegative on the region explored.
class Objective {
public:
    virtual ~Objective() = default;
    virtual std::size_t dimension() const = 0;
    virtual Evaluation evaluate(std::span<const double> params) const = 0;
    virtual double value(std::span<const double> params) const { return evaluate(params).loss; }
};

/// Objective built from two callables.
class FunctionObjective final : public Objective {
public:
    using ValueFn = std::function<double(std::span<const double>)>;
    using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

    FunctionObjective(std::size_t dimension, ValueFn value, GradientFn gradient)
        : dim_(dimension), value_(std::move(value)), gradient_(std::move(gradient)) {}

    std::size_t dimension() const override { return dim_; }
    Evaluation evaluate(std::span<const double> params) const override {
        return {value_(params), gradient_(params)};
    }
    double value(std::span<const double> params) const override { return value_(params); }

private:
    std::size_t dim_;
    ValueFn value_;
    GradientFn gradient_;
};

struct RsdConfig {
    double grad_floor = 1e-12;
    double loss_floor = 1e-12;
    /// Upper bound on the step size; infinity disables the clamp.
    double max_alpha = 1e3;
    bool keep_snapshots = false;

    /// No clamp, for trajectories that must match the closed form.
    static RsdConfig unclamped() {
        RsdConfig c;
        c.max_alpha = std::numeric_limits<double>::infinity();
        return c;
    }
};

struct RsdStepRecord {
    std::size_t iteration = 0;
    double loss = 0.0;
    double alpha = 0.0;
    double grad_norm_sq = 0.0;
    bool alpha_clamped = false;
    /// Parameters after this step.
    std::optional<std::vector<double>> params_snapshot;
};

enum class StepStatus { stepped, converged };

struct RsdStepResult {
    std::vector<double> params;
    RsdStepRecord record;
    StepStatus status = StepStatus::stepped;
};

/// Zero gradient while the loss is still above the floor.
class StationaryPointError : public std::runtime_error {
public:
    StationaryPointError(double loss, double grad_norm_sq);
    double loss() const { return loss_; }
    double grad_norm_sq() const { return grad_norm_sq_; }

private:
    double loss_;
    double grad_norm_sq_;
};

/// Relaxed steepest-descent step: new = params - (L / |J|^2) J, the point
/// where the first-order model of the loss reaches zero. Loss at or below
/// the floor returns `converged` with params untouched.
RsdStepResult rsd_step(const Objective& objective, std::span<const double> params,
                       const RsdConfig& config = {}, std::size_t iteration = 0);

struct RsdRun {
    std::vector<double> params;
    std::vector<RsdStepRecord> trajectory;
    bool converged = false;
    double final_loss = 0.0;
};

/// Repeated rsd_step; stops early on convergence. Throws ArgumentError for
/// iterations == 0.
RsdRun rsd_optimize(const Objective& objective, std::span<const double> params,
                    std::size_t iterations, const RsdConfig& config = {});

std::vector<double> sgd_step(const Objective& objective, std::span<const double> params, double lr);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

std::vector<double> adam_step(const Objective& objective, std::span<const double> params, double lr,
                              AdamState& state);

enum class OptimizerKind { rsd, sgd, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::rsd;
    std::size_t iterations = 1;
    double lr = 1e-3;  // SGD / Adam only
    RsdConfig rsd;
};

/// Loss before each update and after the last one.
struct OptimizationTrace {
    std::vector<double> params;
    std::vector<double> losses;
    std::vector<RsdStepRecord> rsd_steps;
};

/// Runs `spec.iterations` updates of the chosen optimizer.
OptimizationTrace run_optimizer(const Objective& objective, std::span<const double> params,
                                const OptimizerSpec& spec);

}  // namespace rsdflow
