#include "rsdflow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <thread>

#include "rsdflow/image_io.hpp"
#include "rsdflow/integration.hpp"
#include "rsdflow/metrics.hpp"
#include "rsdflow/online.hpp"
#include "rsdflow/photometric.hpp"
#include "rsdflow/rsd.hpp"
#include "rsdflow/sequence.hpp"

namespace rsdflow {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs fn(0..n-1) on a small pool. Results must be written by index; the
// lowest-index failure is rethrown so errors are reproducible too.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string numbered(const std::string& prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", n);
    return prefix + buf;
}

struct OutputDir {
    std::optional<std::filesystem::path> root;

    void flow(const std::string& name, const FlowField& f) const {
        if (!root) return;
        std::filesystem::create_directories(*root / "flows");
        write_flo(f, *root / "flows" / (name + ".flo"));
        write_png(colorize_flow(f), *root / "flows" / (name + ".png"));
    }
    void mask(const std::string& name, const BinaryMask& m) const {
        if (!root) return;
        std::filesystem::create_directories(*root / "masks");
        write_mask_png(m, *root / "masks" / (name + ".png"));
    }
    void labels(const std::string& name, const LabelImage& l) const {
        if (!root) return;
        std::filesystem::create_directories(*root / "masks");
        write_label_png(l, *root / "masks" / (name + ".png"));
    }
};

void check_size(const RunOptions& o) {
    if (o.height < 32 || o.width < 32 || o.height % 8 != 0 || o.width % 8 != 0) {
        throw UsageError("--size must be at least 32x32 with both sides multiples of 8, got " +
                         std::to_string(o.height) + "x" + std::to_string(o.width));
    }
}

void reject_input(const RunOptions& o) {
    if (o.input_dir) throw UsageError("preset " + o.preset + " does not take --input");
}

PhotometricConfig photometric_from(const RunOptions& o) {
    PhotometricConfig cfg;
    cfg.mask_pad = o.mask_pad.value_or(0);
    if (o.lambda_l1) cfg.lambda_l1 = *o.lambda_l1;
    if (o.lambda_ssim) cfg.lambda_ssim = *o.lambda_ssim;
    cfg.literal_eq4 = o.literal_eq4;
    try {
        cfg.validate();
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

json config_echo(const RunOptions& o, const PhotometricConfig* cfg) {
    json c = {{"seed", o.seed}, {"size", {o.height, o.width}}};
    c["input"] = o.input_dir ? json(o.input_dir->string()) : json(nullptr);
    if (cfg) {
        c["lambda_l1"] = cfg->lambda_l1;
        c["lambda_ssim"] = cfg->lambda_ssim;
        c["literal_eq4"] = cfg->literal_eq4;
        c["mask_pad"] = cfg->mask_pad;
        c["ssim_window"] = cfg->ssim_window;
    }
    return c;
}

// Textured patch moving by `step` per frame, with the whole trajectory
// centred in the frame at integer start coordinates.
SyntheticSpec moving_patch(std::uint64_t seed, std::size_t height, std::size_t width, Displacement step,
                           std::size_t frames) {
    SyntheticSpec s;
    s.seed = seed;
    s.height = height;
    s.width = width;
    s.patch_height = height * 7 / 16;
    s.patch_width = width * 7 / 16;
    s.motions.assign(frames - 1, step);
    const double total_x = step.dx * static_cast<double>(frames - 1);
    const double total_y = step.dy * static_cast<double>(frames - 1);
    const double max_x = static_cast<double>(width - s.patch_width);
    const double max_y = static_cast<double>(height - s.patch_height);
    if (std::abs(total_x) > max_x || std::abs(total_y) > max_y) {
        throw UsageError("frame size too small for the preset's motion");
    }
    s.start_x = std::floor((max_x - total_x) / 2.0);
    s.start_y = std::floor((max_y - total_y) / 2.0);
    return s;
}

struct Source {
    SequenceBundle bundle;
    std::vector<FlowField> gt;  // empty for loaded sequences
};

Source load_or_synthesize(const RunOptions& o, Displacement step, std::size_t frames) {
    if (!o.input_dir) {
        SyntheticSequence seq = synthesize_sequence(moving_patch(o.seed, o.height, o.width, step, frames));
        return {std::move(seq.bundle), std::move(seq.gt_flows)};
    }
    Source src{load_sequence(*o.input_dir), {}};
    const Grid& f0 = src.bundle.frames.front();
    const std::size_t scale = ExtractorSettings{}.scale;
    if (f0.height() % scale != 0 || f0.width() % scale != 0) {
        throw UsageError("input frames must have sides divisible by " + std::to_string(scale) + ", got " +
                         f0.shape_string());
    }
    if (src.bundle.frames.size() < 2) throw UsageError("input needs at least two frames");
    if (src.bundle.object_count == 0) throw UsageError("first-frame mask has no objects");
    return src;
}

// Object mask per frame: the annotation when there is one, otherwise the
// most recent annotated frame's mask.
std::vector<BinaryMask> object_masks(const SequenceBundle& b, std::size_t object) {
    std::vector<BinaryMask> out;
    for (std::size_t t = 0; t < b.frames.size(); ++t)
        out.push_back(b.has_labels(t) ? b.object_mask(object, t) : out.back());
    return out;
}

std::string object_prefix(std::size_t object, std::size_t objects) {
    return objects == 1 ? "" : "obj" + std::to_string(object) + "_";
}

Grid warp_mask(const BinaryMask& mask, const FlowField& flow) { return warp(mask.to_grid(), flow); }

json frame_metrics(const Grid& current, const Grid& previous, const FlowField& flow,
                   const BinaryMask& previous_mask, const BinaryMask& truth) {
    const Grid warped = warp(previous, flow);
    const auto [a, b] = crop_to_bbox_pair(current, warped, truth);
    const BinaryMask pred = BinaryMask::from_probability(warp_mask(previous_mask, flow));
    return {{"psnr", psnr(a, b)},
            {"ssim", mean_ssim(a, b)},
            {"j", iou(pred, truth)},
            {"f", boundary_f(pred, truth, default_boundary_tolerance(truth.height(), truth.width()))}};
}

std::pair<double, double> mean_flow(const FlowField& flow, const BinaryMask& mask) {
    double u = 0.0, v = 0.0;
    const double n = static_cast<double>(std::max<std::size_t>(1, mask.count()));
    for (std::size_t y = 0; y < mask.height(); ++y)
        for (std::size_t x = 0; x < mask.width(); ++x)
            if (mask.at(y, x)) {
                u += flow.du(y, x);
                v += flow.dv(y, x);
            }
    return {u / n, v / n};
}

double endpoint_error(const FlowField& flow, const FlowField& gt, const BinaryMask& mask) {
    double s = 0.0;
    for (std::size_t y = 0; y < mask.height(); ++y)
        for (std::size_t x = 0; x < mask.width(); ++x)
            if (mask.at(y, x)) s += std::hypot(flow.du(y, x) - gt.du(y, x), flow.dv(y, x) - gt.dv(y, x));
    return s / static_cast<double>(std::max<std::size_t>(1, mask.count()));
}

json mean_of(const std::vector<json>& rows, const char* key) {
    if (rows.empty()) return nullptr;
    json out;
    for (const char* m : {"psnr", "ssim", "j", "f"}) {
        double s = 0.0;
        for (const auto& r : rows) s += r[key][m].get<double>();
        out[m] = s / static_cast<double>(rows.size());
    }
    return out;
}

// ---------------------------------------------------------------------------

double race_f(double x) { return (x - 5.0) * (x - 5.0) + 2.0; }

json fig3_race(const RunOptions& o, json& timing) {
    reject_input(o);
    const std::size_t iters = o.iterations.value_or(10);
    if (iters == 0) throw UsageError("--iters must be >= 1");
    constexpr double kLevel = 2.6;
    const FunctionObjective objective(
        1, [](std::span<const double> p) { return race_f(p[0]); },
        [](std::span<const double> p) { return std::vector<double>{2.0 * (p[0] - 5.0)}; });

    auto record = [](std::vector<double> xs) {
        json traj = json::array();
        for (std::size_t i = 0; i < xs.size(); ++i)
            traj.push_back({{"iteration", i}, {"x", xs[i]}, {"f", race_f(xs[i])}});
        return traj;
    };
    auto first_reach = [&](const std::vector<double>& xs) -> json {
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (race_f(xs[i]) <= kLevel) return i;
        return nullptr;
    };

    const auto start = Clock::now();
    json trajectories, reach;
    for (const double lr : {0.2, 0.7}) {
        std::vector<double> xs{0.0};
        for (std::size_t i = 0; i < iters; ++i) xs.push_back(sgd_step(objective, std::vector{xs.back()}, lr)[0]);
        const std::string name = lr == 0.2 ? "gd_0.2" : "gd_0.7";
        trajectories[name] = record(xs);
        reach[name] = first_reach(xs);
    }
    std::vector<double> xs{0.0};
    std::string stop = "iterations";
    for (std::size_t i = 0; i < iters; ++i) {
        try {
            const RsdStepResult r = rsd_step(objective, std::vector{xs.back()}, RsdConfig::unclamped(), i);
            if (r.status == StepStatus::converged) {
                stop = "converged";
                break;
            }
            xs.push_back(r.params[0]);
        } catch (const StationaryPointError&) {
            stop = "stationary point";
            break;
        }
    }
    trajectories["rsd"] = record(xs);
    reach["rsd"] = first_reach(xs);
    timing["optimize_seconds"] = seconds_since(start);

    json c = config_echo(o, nullptr);
    c["iterations"] = iters;
    c["x0"] = 0.0;
    c["objective"] = "(x-5)^2+2";
    return {{"config", c},
            {"results",
             {{"trajectories", trajectories},
              {"rsd_stop", stop},
              {"level", kLevel},
              {"first_iteration_at_or_below_level", reach}}}};
}

// ---------------------------------------------------------------------------

SessionConfig session_from(const PhotometricConfig& cfg) {
    SessionConfig s;
    s.photometric = cfg;
    s.optimizer.kind = OptimizerKind::rsd;
    return s;
}

json flow_sanity(const RunOptions& o, const OutputDir& out, json& timing) {
    check_size(o);
    const PhotometricConfig cfg = photometric_from(o);
    const std::size_t iters = o.iterations.value_or(5);
    const std::size_t interval = o.interval.value_or(1);
    if (iters == 0 || interval == 0) throw UsageError("--iters and --interval must be >= 1");
    const Source src = load_or_synthesize(o, {3.0, -2.0}, 5);
    const auto& b = src.bundle;
    const SessionConfig session = session_from(cfg);

    double compute = 0.0;
    std::size_t emitted_frames = 0;
    std::vector<json> frames;
    std::vector<std::vector<Grid>> predicted(b.frames.size());
    for (std::size_t k = 1; k <= b.object_count; ++k) {
        const std::vector<BinaryMask> masks = object_masks(b, k);
        const auto start = Clock::now();
        const StreamResult run = interval == 1 ? run_streaming(session, b.frames, masks, iters)
                                               : run_batched(session, b.frames, masks, interval, iters);
        std::vector<Grid> warped_masks;
        for (const auto& ef : run.flows) warped_masks.push_back(warp_mask(masks[ef.frame - 1], ef.flow));
        compute += seconds_since(start);
        emitted_frames += run.flows.size();

        for (std::size_t i = 0; i < run.flows.size(); ++i) {
            const EmittedFlow& ef = run.flows[i];
            const std::size_t t = ef.frame;
            predicted[t].push_back(warped_masks[i]);
            out.flow(object_prefix(k, b.object_count) + numbered("", t), ef.flow);
            json entry = {{"frame", t}, {"object", k}, {"losses", ef.losses}};
            const auto [u, v] = mean_flow(ef.flow, masks[t]);
            entry["mean_flow"] = {u, v};
            if (!src.gt.empty()) {
                const auto [gu, gv] = mean_flow(src.gt[t], masks[t]);
                entry["gt_flow"] = {gu, gv};
                entry["flow_epe"] = endpoint_error(ef.flow, src.gt[t], masks[t]);
            }
            if (b.has_labels(t) && masks[t].any()) {
                const FlowField zero(ef.flow.height(), ef.flow.width());
                entry["rows"] = {
                    {"w/o warp", frame_metrics(b.frames[t], b.frames[t - 1], zero, masks[t - 1], masks[t])},
                    {"RSD", frame_metrics(b.frames[t], b.frames[t - 1], ef.flow, masks[t - 1], masks[t])}};
            }
            frames.push_back(std::move(entry));
        }
    }
    for (std::size_t t = 0; t < predicted.size(); ++t) {
        if (predicted[t].empty()) continue;
        if (b.object_count == 1) out.mask(numbered("", t), BinaryMask::from_probability(predicted[t][0]));
        else out.labels(numbered("", t), merge_object_maps(predicted[t]));
    }

    std::vector<json> scored;
    for (const auto& f : frames)
        if (f.contains("rows")) scored.push_back(f["rows"]);
    bool better = !scored.empty();
    for (const auto& r : scored) better = better && r["RSD"]["psnr"].get<double>() > r["w/o warp"]["psnr"].get<double>();

    timing["compute_seconds"] = compute;
    timing["fps"] = compute > 0.0 ? static_cast<double>(emitted_frames) / compute : 0.0;
    json c = config_echo(o, &cfg);
    c["iterations"] = iters;
    c["interval"] = interval;
    c["optimizer"] = "rsd";
    c["frames"] = b.frames.size();
    c["objects"] = b.object_count;
    if (src.gt.size() > 1) c["motion"] = {3.0, -2.0};
    return {{"config", c},
            {"results",
             {{"frames", frames},
              {"summary", {{"w/o warp", mean_of(scored, "w/o warp")}, {"RSD", mean_of(scored, "RSD")}}},
              {"rsd_psnr_better_every_frame", better}}}};
}

// ---------------------------------------------------------------------------

struct SweepEntry {
    std::string name;
    OptimizerSpec spec;
};

std::vector<SweepEntry> sweep_entries(std::size_t iters) {
    std::vector<SweepEntry> out;
    OptimizerSpec rsd;
    rsd.kind = OptimizerKind::rsd;
    rsd.iterations = iters;
    out.push_back({"rsd", rsd});
    const std::pair<const char*, double> sgd[] = {
        {"sgd_1e-6", 1e-6}, {"sgd_1e-5", 1e-5}, {"sgd_1e-4", 1e-4}, {"sgd_1e-3", 1e-3}, {"sgd_1e-2", 1e-2}};
    for (const auto& [name, lr] : sgd) out.push_back({name, {OptimizerKind::sgd, iters, lr, {}}});
    const std::pair<const char*, double> adam[] = {{"adam_1e-4", 1e-4}, {"adam_1e-3", 1e-3}, {"adam_1e-2", 1e-2}};
    for (const auto& [name, lr] : adam) out.push_back({name, {OptimizerKind::adam, iters, lr, {}}});
    return out;
}

struct PairData {
    std::uint64_t seed = 0;
    std::size_t frame = 1;
    Grid current, previous;
    BinaryMask mask;
};

json optimizer_sweep(const RunOptions& o, const OutputDir& out, json& timing) {
    check_size(o);
    const PhotometricConfig cfg = photometric_from(o);
    const std::size_t iters = o.iterations.value_or(5);
    if (iters == 0) throw UsageError("--iters must be >= 1");
    constexpr std::size_t kPairs = 20;

    std::vector<PairData> pairs;
    if (o.input_dir) {
        const Source src = load_or_synthesize(o, {}, 2);
        const std::vector<BinaryMask> masks = object_masks(src.bundle, 1);
        for (std::size_t t = 1; t < src.bundle.frames.size() && pairs.size() < kPairs; ++t)
            pairs.push_back({o.seed, t, src.bundle.frames[t], src.bundle.frames[t - 1], masks[t]});
    } else {
        for (std::size_t i = 0; i < kPairs; ++i) {
            const std::uint64_t seed = o.seed + i;
            const SyntheticSequence seq = synthesize_sequence(moving_patch(seed, o.height, o.width, {3.0, -2.0}, 2));
            pairs.push_back({seed, 1, seq.bundle.frames[1], seq.bundle.frames[0], seq.bundle.object_mask(1, 1)});
        }
    }

    const std::vector<SweepEntry> entries = sweep_entries(iters);
    const SessionConfig session = session_from(cfg);
    std::vector<json> per_pair(pairs.size());
    std::vector<FlowField> rsd_flows(pairs.size());
    std::vector<double> seconds(pairs.size());
    parallel_for(pairs.size(), o.workers, [&](std::size_t i) {
        const auto start = Clock::now();
        const PairData& p = pairs[i];
        const FeatureStack cur = extract_features(p.current, session.extractor);
        const FeatureStack prev = extract_features(p.previous, session.extractor);
        const MotionParams shape = MotionParams::zeros(session.motion);
        const MotionObjective objective(shape, {{&p.current, &p.previous, &cur, &prev, &p.mask}}, cfg);
        json losses;
        for (const auto& e : entries) {
            const OptimizationTrace trace = run_optimizer(objective, shape.to_vector(), e.spec);
            losses[e.name] = trace.losses;
            if (e.spec.kind == OptimizerKind::rsd) rsd_flows[i] = objective.flow(trace.params, 0);
        }
        seconds[i] = seconds_since(start);
        per_pair[i] = {{"seed", p.seed}, {"frame", p.frame}, {"losses", losses}};
    });

    json curves;
    for (const auto& e : entries) {
        std::vector<double> mean(iters + 1, 0.0);
        for (const auto& p : per_pair) {
            const auto l = p["losses"][e.name].get<std::vector<double>>();
            for (std::size_t k = 0; k <= iters; ++k) mean[k] += l[std::min(k, l.size() - 1)];
        }
        for (auto& m : mean) m /= static_cast<double>(per_pair.size());
        curves[e.name] = mean;
    }
    std::size_t wins = 0;
    for (const auto& p : per_pair) {
        double best_sgd = std::numeric_limits<double>::infinity();
        for (const auto& e : entries)
            if (e.spec.kind == OptimizerKind::sgd) best_sgd = std::min(best_sgd, p["losses"][e.name][1].get<double>());
        const auto& rsd = p["losses"]["rsd"];
        if (rsd[std::min<std::size_t>(1, rsd.size() - 1)].get<double>() < best_sgd) ++wins;
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) out.flow(numbered("pair", i), rsd_flows[i]);

    double total = 0.0;
    for (double s : seconds) total += s;
    timing["compute_seconds"] = total;
    json c = config_echo(o, &cfg);
    c["iterations"] = iters;
    c["pairs"] = pairs.size();
    json opt = json::array();
    for (const auto& e : entries) opt.push_back({{"name", e.name}, {"kind", to_string(e.spec.kind)}, {"lr", e.spec.lr}});
    c["optimizers"] = opt;
    return {{"config", c},
            {"results",
             {{"pairs", per_pair},
              {"mean_loss_curves", curves},
              {"rsd_first_iteration_beats_best_sgd", wins},
              {"rsd_first_iteration_win_rate", static_cast<double>(wins) / static_cast<double>(pairs.size())}}}};
}

// ---------------------------------------------------------------------------

// Appearance-style map: confident 0.8 / 0.2 with a missed block inside the
// object and a spurious block outside it.
Grid corrupt_map(const BinaryMask& truth, std::mt19937_64& rng) {
    Grid p(truth.height(), truth.width(), 1);
    for (std::size_t y = 0; y < truth.height(); ++y)
        for (std::size_t x = 0; x < truth.width(); ++x) p.at(y, x) = truth.at(y, x) ? 0.8 : 0.2;
    const auto box = *truth.bounds();
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return lo + static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    const std::size_t hole = box.rows() / 3;
    const std::size_t hy = pick(box.top, box.bottom + 1 - hole), hx = pick(box.left, box.right + 1 - hole);
    for (std::size_t y = hy; y < hy + hole; ++y)
        for (std::size_t x = hx; x < hx + hole; ++x) p.at(y, x) = 0.25;
    const std::size_t blob = box.rows() / 4;
    for (int attempt = 0; attempt < 64; ++attempt) {
        const std::size_t by = pick(0, truth.height() - blob), bx = pick(0, truth.width() - blob);
        bool clear = true;
        for (std::size_t y = by; y < by + blob && clear; ++y)
            for (std::size_t x = bx; x < bx + blob && clear; ++x) clear = !truth.at(y, x);
        if (!clear) continue;
        for (std::size_t y = by; y < by + blob; ++y)
            for (std::size_t x = bx; x < bx + blob; ++x) p.at(y, x) = 0.75;
        break;
    }
    return p;
}

struct DemoSequence {
    std::uint64_t seed = 0;
    Displacement motion;
    std::vector<IntegrationSample> samples;
};

DemoSequence demo_sequence(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t depth) {
    std::mt19937_64 rng(seed);
    DemoSequence d{seed, {}, {}};
    do {
        d.motion = {static_cast<double>(static_cast<int>(rng() % 5) - 2), static_cast<double>(static_cast<int>(rng() % 5) - 2)};
    } while (d.motion.dx == 0.0 && d.motion.dy == 0.0);
    const SyntheticSequence seq = synthesize_sequence(moving_patch(seed, height, width, d.motion, 4));
    const auto& b = seq.bundle;
    for (std::size_t t = 2; t < b.frames.size(); ++t) {
        IntegrationSample s;
        s.frame = b.frames[t];
        s.target = b.object_mask(1, t);
        s.prob = corrupt_map(s.target, rng);
        s.flow = seq.gt_flows[t];
        if (depth >= 1) {
            s.history.p1 = b.object_mask(1, t - 1).to_grid();
            s.history.frame1 = b.frames[t - 1];
        }
        if (depth >= 2) {
            s.history.p2 = b.object_mask(1, t - 2).to_grid();
            s.history.frame2 = b.frames[t - 2];
            s.history.older_flow = seq.gt_flows[t - 1];
        }
        d.samples.push_back(std::move(s));
    }
    return d;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json integration_demo(const RunOptions& o, const OutputDir& out, json& timing) {
    reject_input(o);
    check_size(o);
    const std::size_t depth = o.history.value_or(2);
    if (depth > 2) throw UsageError("--history must be 0, 1 or 2");
    constexpr std::size_t kSequences = 10;
    constexpr std::uint64_t kTrainOffset = 1000;

    std::vector<DemoSequence> train(kSequences), eval(kSequences);
    parallel_for(2 * kSequences, o.workers, [&](std::size_t i) {
        if (i < kSequences) train[i] = demo_sequence(o.seed + kTrainOffset + i, o.height, o.width, depth);
        else eval[i - kSequences] = demo_sequence(o.seed + i - kSequences, o.height, o.width, depth);
    });
    std::vector<IntegrationSample> train_samples;
    for (const auto& d : train) train_samples.insert(train_samples.end(), d.samples.begin(), d.samples.end());

    TrainingConfig tc;
    tc.epochs = o.iterations.value_or(200);
    tc.lr = 1.0;
    tc.options.depth = depth;
    tc.freeze_x = true;
    const auto start = Clock::now();
    const TrainingResult trained = train_integration(IntegrationParams::initial(), train_samples, tc);
    timing["train_seconds"] = seconds_since(start);

    const auto eval_start = Clock::now();
    json sequences = json::array();
    std::vector<double> before, after;
    double depth0_diff = 0.0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const auto& d = eval[i];
        double ib = 0.0, ia = 0.0;
        for (std::size_t k = 0; k < d.samples.size(); ++k) {
            const auto& s = d.samples[k];
            const Grid refined = integrate(trained.params, s.frame, s.prob, s.history, s.flow, tc.options);
            const Grid bare = integrate(trained.params, s.frame, s.prob, {}, s.flow, {0, true});
            for (std::size_t p = 0; p < bare.size(); ++p)
                depth0_diff = std::max(depth0_diff, std::abs(bare.data()[p] - s.prob.data()[p]));
            const BinaryMask refined_mask = BinaryMask::from_probability(refined);
            ib += iou(BinaryMask::from_probability(s.prob), s.target);
            ia += iou(refined_mask, s.target);
            out.mask(numbered("seq" + std::to_string(i) + "_", k + 2), refined_mask);
            out.flow(numbered("seq" + std::to_string(i) + "_", k + 2), s.flow);
        }
        ib /= static_cast<double>(d.samples.size());
        ia /= static_cast<double>(d.samples.size());
        before.push_back(ib);
        after.push_back(ia);
        sequences.push_back({{"seed", d.seed}, {"motion", {d.motion.dx, d.motion.dy}}, {"iou_before", ib}, {"iou_after", ia}});
    }
    timing["eval_seconds"] = seconds_since(eval_start);
    if (out.root) {
        std::filesystem::create_directories(*out.root);
        save_integration(trained.params, *out.root / "integration.bin");
    }

    json c = config_echo(o, nullptr);
    c["history"] = depth;
    c["epochs"] = tc.epochs;
    c["lr"] = tc.lr;
    c["train_seeds"] = {o.seed + kTrainOffset, o.seed + kTrainOffset + kSequences - 1};
    c["eval_seeds"] = {o.seed, o.seed + kSequences - 1};
    const double mb = median(before), ma = median(after);
    return {{"config", c},
            {"results",
             {{"sequences", sequences},
              {"train_losses", trained.losses},
              {"median_iou_before", mb},
              {"median_iou_after", ma},
              {"median_iou_gain", ma - mb},
              {"depth0_max_abs_diff", depth0_diff},
              {"parameters", trained.params.to_vector()}}}};
}

// ---------------------------------------------------------------------------

json stream_vs_batch(const RunOptions& o, const OutputDir& out, json& timing) {
    check_size(o);
    const PhotometricConfig cfg = photometric_from(o);
    const std::size_t iters = o.iterations.value_or(2);
    const std::size_t interval = o.interval.value_or(1);
    if (iters == 0 || interval == 0) throw UsageError("--iters and --interval must be >= 1");
    const Source src = load_or_synthesize(o, {2.0, -1.0}, 10);
    const auto& b = src.bundle;
    const SessionConfig session = session_from(cfg);

    double stream_s = 0.0, batch_s = 0.0, overall = 0.0;
    std::size_t stream_n = 0, batch_n = 0, compared = 0;
    json objects = json::array();
    std::vector<std::vector<Grid>> predicted(b.frames.size());
    for (std::size_t k = 1; k <= b.object_count; ++k) {
        const std::vector<BinaryMask> masks = object_masks(b, k);
        auto start = Clock::now();
        const StreamResult stream = run_streaming(session, b.frames, masks, iters);
        stream_s += seconds_since(start);
        start = Clock::now();
        const StreamResult batch = run_batched(session, b.frames, masks, interval, iters);
        batch_s += seconds_since(start);
        stream_n += stream.flows.size();
        batch_n += batch.flows.size();

        json per_frame = json::array();
        double worst = 0.0;
        for (const auto& bf : batch.flows) {
            const auto it = std::find_if(stream.flows.begin(), stream.flows.end(),
                                         [&](const EmittedFlow& s) { return s.frame == bf.frame; });
            double d = 0.0;
            const auto& a = it->flow.grid().storage();
            const auto& c = bf.flow.grid().storage();
            for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - c[i]));
            worst = std::max(worst, d);
            ++compared;
            per_frame.push_back({{"frame", bf.frame}, {"update", bf.update}, {"max_abs_discrepancy", d}});
            predicted[bf.frame].push_back(warp_mask(masks[bf.frame - 1], bf.flow));
            out.flow(object_prefix(k, b.object_count) + numbered("batch_", bf.frame), bf.flow);
        }
        for (const auto& sf : stream.flows)
            out.flow(object_prefix(k, b.object_count) + numbered("stream_", sf.frame), sf.flow);
        overall = std::max(overall, worst);
        objects.push_back({{"object", k},
                           {"frames", per_frame},
                           {"max_abs_discrepancy", batch.flows.empty() ? json(nullptr) : json(worst)},
                           {"stream", {{"updates", stream.updates}, {"featurizations", stream.featurizations}, {"flows", stream.flows.size()}}},
                           {"batch", {{"updates", batch.updates}, {"featurizations", batch.featurizations}, {"flows", batch.flows.size()}}}});
    }
    for (std::size_t t = 0; t < predicted.size(); ++t) {
        if (predicted[t].empty()) continue;
        if (b.object_count == 1) out.mask(numbered("", t), BinaryMask::from_probability(predicted[t][0]));
        else out.labels(numbered("", t), merge_object_maps(predicted[t]));
    }

    timing["stream_seconds"] = stream_s;
    timing["batch_seconds"] = batch_s;
    timing["stream_fps"] = stream_s > 0.0 ? static_cast<double>(stream_n) / stream_s : 0.0;
    timing["batch_fps"] = batch_s > 0.0 ? static_cast<double>(batch_n) / batch_s : 0.0;
    json c = config_echo(o, &cfg);
    c["iterations"] = iters;
    c["interval"] = interval;
    c["frames"] = b.frames.size();
    c["objects"] = b.object_count;
    if (!src.gt.empty()) c["motion"] = {2.0, -1.0};
    return {{"config", c},
            {"results",
             {{"objects", objects},
              {"compared_flows", compared},
              {"max_abs_discrepancy", compared ? json(overall) : json(nullptr)}}}};
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"fig3-race", "flow-sanity", "optimizer-sweep",
                                                   "integration-demo", "stream-vs-batch"};
    return names;
}

json run_preset(const RunOptions& options) {
    const OutputDir out{options.out_dir};
    json timing;
    const auto start = Clock::now();
    json body;
    if (options.preset == "fig3-race") body = fig3_race(options, timing);
    else if (options.preset == "flow-sanity") body = flow_sanity(options, out, timing);
    else if (options.preset == "optimizer-sweep") body = optimizer_sweep(options, out, timing);
    else if (options.preset == "integration-demo") body = integration_demo(options, out, timing);
    else if (options.preset == "stream-vs-batch") body = stream_vs_batch(options, out, timing);
    else throw UsageError("unknown preset '" + options.preset + "'");
    timing["wall_seconds"] = seconds_since(start);

    json report = {{"schema_version", kReportSchemaVersion},
                   {"preset", options.preset},
                   {"config", body["config"]},
                   {"results", body["results"]},
                   {"timing", timing}};
    if (out.root) {
        std::filesystem::create_directories(*out.root);
        std::ofstream f(*out.root / "report.json");
        f << report.dump(2) << '\n';
        if (!f) throw FormatError("cannot write " + (*out.root / "report.json").string());
    }
    return report;
}

json without_timing(json report) {
    report.erase("timing");
    return report;
}

}  // namespace rsdflow
