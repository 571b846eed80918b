// rsdflow run <preset> [options]: runs an experiment preset, prints its JSON
// report and optionally writes report.json, flows/ and masks/ to --out.

#include <cstdio>
#include <iostream>
#include <regex>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rsdflow/errors.hpp"
#include "rsdflow/harness.hpp"

namespace {

int fail(const std::string& kind, const std::string& message, int code) {
    const nlohmann::json err = {{"error", {{"kind", kind}, {"message", message}}}};
    std::cerr << err.dump() << '\n';
    return code;
}

void parse_size(const std::string& text, rsdflow::RunOptions& o) {
    static const std::regex pattern("(\\d+)x(\\d+)");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) throw rsdflow::UsageError("--size expects HxW, got '" + text + "'");
    o.height = std::stoul(m[1].str());
    o.width = std::stoul(m[2].str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online motion-model optical flow experiments"};
    app.require_subcommand(1);

    rsdflow::RunOptions o;
    std::string size = "64x64", out, input;
    std::size_t interval = 0, iters = 0, history = 0, mask_pad = 0;
    double lambda_l1 = 0.0, lambda_ssim = 0.0;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "Run an experiment preset");
    run->add_option("preset", o.preset, "fig3-race | flow-sanity | optimizer-sweep | integration-demo | stream-vs-batch")
        ->required();
    run->add_option("--seed", o.seed, "Base seed");
    run->add_option("--size", size, "Frame size HxW for synthetic data");
    auto* o_interval = run->add_option("--interval", interval, "Update interval N (frames per batch)");
    auto* o_iters = run->add_option("--iters", iters, "Optimizer iterations (epochs for integration-demo)");
    auto* o_history = run->add_option("--history", history, "Integration history depth")->check(CLI::Range(0, 2));
    auto* o_out = run->add_option("--out", out, "Output directory");
    auto* o_input = run->add_option("--input", input, "Sequence directory with frames/ and masks/");
    auto* o_l1 = run->add_option("--lambda-l1", lambda_l1, "L1 weight");
    auto* o_ssim = run->add_option("--lambda-ssim", lambda_ssim, "SSIM weight");
    run->add_flag("--literal-eq4", o.literal_eq4, "Use L1 - SSIM instead of L1 + DSSIM");
    auto* o_pad = run->add_option("--mask-pad", mask_pad, "Bounding-box padding in pixels");
    run->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
    run->add_flag("--quiet", quiet, "Do not print the report");

    auto* list = app.add_subcommand("presets", "List preset names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    if (*list) {
        for (const auto& n : rsdflow::preset_names()) std::cout << n << '\n';
        return 0;
    }

    try {
        parse_size(size, o);
        if (*o_interval) o.interval = interval;
        if (*o_iters) o.iterations = iters;
        if (*o_history) o.history = history;
        if (*o_pad) o.mask_pad = mask_pad;
        if (*o_l1) o.lambda_l1 = lambda_l1;
        if (*o_ssim) o.lambda_ssim = lambda_ssim;
        if (*o_out) o.out_dir = out;
        if (*o_input) o.input_dir = input;
        const nlohmann::json report = rsdflow::run_preset(o);
        if (!quiet) std::cout << report.dump(2) << '\n';
        return 0;
    } catch (const rsdflow::UsageError& e) {
        return fail("usage", e.what(), 2);
    } catch (const rsdflow::FormatError& e) {
        return fail("format", e.what(), 3);
    } catch (const rsdflow::DimensionError& e) {
        return fail("dimension", e.what(), 3);
    } catch (const rsdflow::ArgumentError& e) {
        return fail("argument", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), 1);
    }
}
