#include "rsdflow/rsd.hpp"

#include <cmath>
#include <sstream>

#include "rsdflow/errors.hpp"

namespace rsdflow {

namespace {

std::string stationary_message(double loss, double grad_norm_sq) {
    std::ostringstream os;
    os << "stationary with nonzero loss: loss=" << loss << " |J|^2=" << grad_norm_sq;
    return os.str();
}

void check_gradient(const Evaluation& ev, std::size_t expected) {
    if (ev.gradient.size() != expected) {
        throw DimensionError("objective returned gradient of length " +
                             std::to_string(ev.gradient.size()) + ", expected " +
                             std::to_string(expected));
    }
}

}  // namespace

StationaryPointError::StationaryPointError(double loss, double grad_norm_sq)
    : std::runtime_error(stationary_message(loss, grad_norm_sq)), loss_(loss),
      grad_norm_sq_(grad_norm_sq) {}

RsdStepResult rsd_step(const Objective& objective, std::span<const double> params,
                       const RsdConfig& config, std::size_t iteration) {
    const Evaluation ev = objective.evaluate(params);
    check_gradient(ev, params.size());

    RsdStepResult out;
    out.params.assign(params.begin(), params.end());
    out.record.iteration = iteration;
    out.record.loss = ev.loss;
    for (double g : ev.gradient) out.record.grad_norm_sq += g * g;

    if (ev.loss <= config.loss_floor) {
        out.status = StepStatus::converged;
        return out;
    }
    if (out.record.grad_norm_sq <= config.grad_floor) {
        throw StationaryPointError(ev.loss, out.record.grad_norm_sq);
    }

    double alpha = ev.loss / out.record.grad_norm_sq;
    if (alpha > config.max_alpha) {
        alpha = config.max_alpha;
        out.record.alpha_clamped = true;
    }
    out.record.alpha = alpha;
    for (std::size_t i = 0; i < out.params.size(); ++i) out.params[i] -= alpha * ev.gradient[i];
    if (config.keep_snapshots) out.record.params_snapshot = out.params;
    return out;
}

RsdRun rsd_optimize(const Objective& objective, std::span<const double> params,
                    std::size_t iterations, const RsdConfig& config) {
    if (iterations == 0) throw ArgumentError("rsd_optimize: iterations must be >= 1");
    RsdRun run;
    run.params.assign(params.begin(), params.end());
    for (std::size_t i = 0; i < iterations; ++i) {
        RsdStepResult step = rsd_step(objective, run.params, config, i);
        if (step.status == StepStatus::converged) {
            run.converged = true;
            run.final_loss = step.record.loss;
            return run;
        }
        run.params = std::move(step.params);
        run.trajectory.push_back(std::move(step.record));
    }
    run.final_loss = objective.value(run.params);
    return run;
}

std::vector<double> sgd_step(const Objective& objective, std::span<const double> params, double lr) {
    if (!(lr > 0.0)) throw ArgumentError("sgd_step: lr must be > 0");
    const Evaluation ev = objective.evaluate(params);
    check_gradient(ev, params.size());
    std::vector<double> out(params.begin(), params.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lr * ev.gradient[i];
    return out;
}

std::vector<double> adam_step(const Objective& objective, std::span<const double> params, double lr,
                              AdamState& state) {
    if (!(lr > 0.0)) throw ArgumentError("adam_step: lr must be > 0");
    const Evaluation ev = objective.evaluate(params);
    check_gradient(ev, params.size());
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw DimensionError("adam state size mismatch");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    std::vector<double> out(params.begin(), params.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double g = ev.gradient[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        out[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    return out;
}

std::string to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::rsd: return "rsd";
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adam: return "adam";
    }
    return "unknown";
}

OptimizerKind optimizer_from_string(const std::string& name) {
    if (name == "rsd") return OptimizerKind::rsd;
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ArgumentError("unknown optimizer '" + name + "'");
}

OptimizationTrace run_optimizer(const Objective& objective, std::span<const double> params,
                                const OptimizerSpec& spec) {
    OptimizationTrace trace;
    trace.params.assign(params.begin(), params.end());
    if (spec.kind == OptimizerKind::rsd) {
        RsdRun run = rsd_optimize(objective, params, spec.iterations, spec.rsd);
        for (const auto& r : run.trajectory) trace.losses.push_back(r.loss);
        trace.losses.push_back(run.final_loss);
        trace.params = std::move(run.params);
        trace.rsd_steps = std::move(run.trajectory);
        return trace;
    }
    AdamState adam;
    for (std::size_t i = 0; i < spec.iterations; ++i) {
        trace.losses.push_back(objective.value(trace.params));
        trace.params = spec.kind == OptimizerKind::sgd
                           ? sgd_step(objective, trace.params, spec.lr)
                           : adam_step(objective, trace.params, spec.lr, adam);
    }
    trace.losses.push_back(objective.value(trace.params));
    return trace;
}

}  // namespace rsdflow
