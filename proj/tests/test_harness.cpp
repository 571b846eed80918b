#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rsdflow/harness.hpp"
#include "rsdflow/image_io.hpp"

using namespace rsdflow;
using nlohmann::json;

namespace {

RunOptions preset(const char* name) {
    RunOptions o;
    o.preset = name;
    o.workers = 1;
    return o;
}

}  // namespace

TEST_SUITE("run_preset") {
    TEST_CASE("unknown preset and bad sizes are usage errors") {
        CHECK_THROWS_AS(run_preset(preset("no-such-preset")), UsageError);
        RunOptions o = preset("flow-sanity");
        o.height = 20;
        o.width = 20;
        CHECK_THROWS_AS(run_preset(o), UsageError);
        o.height = 68;
        o.width = 64;
        CHECK_THROWS_AS(run_preset(o), UsageError);
        RunOptions race = preset("fig3-race");
        race.input_dir = "/tmp";
        CHECK_THROWS_AS(run_preset(race), UsageError);
    }

    TEST_CASE("preset list") {
        CHECK(preset_names() == std::vector<std::string>{"fig3-race", "flow-sanity", "optimizer-sweep", "integration-demo", "stream-vs-batch"});
    }

    TEST_CASE("fig3-race follows the closed-form iterations") {
        const json r = run_preset(preset("fig3-race"));
        CHECK(r["schema_version"] == kReportSchemaVersion);
        CHECK(r["preset"] == "fig3-race");
        auto f = [](double x) { return (x - 5) * (x - 5) + 2; };
        double x = 0.0;
        for (const auto& step : r["results"]["trajectories"]["rsd"]) {
            CHECK(step["x"].get<double>() == doctest::Approx(x).epsilon(1e-9));
            x -= f(x) / (2 * (x - 5));
        }
        for (const double lr : {0.2, 0.7}) {
            double g = 0.0;
            for (const auto& step : r["results"]["trajectories"][lr == 0.2 ? "gd_0.2" : "gd_0.7"]) {
                CHECK(step["x"].get<double>() == doctest::Approx(g).epsilon(1e-9));
                g -= lr * 2 * (g - 5);
            }
        }
        const json& reach = r["results"]["first_iteration_at_or_below_level"];
        CHECK(reach["rsd"].get<int>() < reach["gd_0.2"].get<int>());
        CHECK(reach["rsd"].get<int>() < reach["gd_0.7"].get<int>());
    }

    TEST_CASE("flow-sanity: warping beats no warping") {
        RunOptions o = preset("flow-sanity");
        o.iterations = 3;
        const json r = run_preset(o);
        CHECK(r["results"]["rsd_psnr_better_every_frame"] == true);
        CHECK(r["results"]["frames"].size() == 4);
        for (const auto& f : r["results"]["frames"]) CHECK(f["flow_epe"].get<double>() < 0.5);
    }

    TEST_CASE("stream-vs-batch with interval 1 agrees within 1e-6") {
        const json r = run_preset(preset("stream-vs-batch"));
        CHECK(r["results"]["compared_flows"].get<std::size_t>() == 9);
        CHECK(r["results"]["max_abs_discrepancy"].get<double>() <= 1e-6);
    }

    TEST_CASE("reports are identical apart from timing, across worker counts") {
        RunOptions a = preset("integration-demo");
        a.iterations = 5;
        RunOptions b = a;
        b.workers = 3;
        const json ra = run_preset(a), rb = run_preset(b);
        CHECK(ra.contains("timing"));
        CHECK_FALSE(without_timing(ra).contains("timing"));
        CHECK(without_timing(ra) == without_timing(rb));
        CHECK(ra["results"]["depth0_max_abs_diff"].get<double>() == 0.0);
    }

    TEST_CASE("output directory receives the report, flows and masks") {
        const auto dir = std::filesystem::temp_directory_path() / "rsdflow_harness_out";
        std::filesystem::remove_all(dir);
        RunOptions o = preset("flow-sanity");
        o.iterations = 1;
        o.out_dir = dir;
        const json r = run_preset(o);
        REQUIRE(std::filesystem::exists(dir / "report.json"));
        const json disk = json::parse(std::ifstream(dir / "report.json"));
        CHECK(disk["schema_version"] == 1);
        CHECK(without_timing(disk) == without_timing(r));
        std::size_t flo = 0, png = 0;
        for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
            flo += e.path().extension() == ".flo";
            png += e.path().extension() == ".png";
        }
        CHECK(flo == 4);
        CHECK(png >= 4);
        for (const auto& e : std::filesystem::directory_iterator(dir / "flows"))
            if (e.path().extension() == ".flo") CHECK(read_flo(e.path()).height() == 64);
        std::filesystem::remove_all(dir);
    }
}
