#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsdflow/errors.hpp"

namespace rsdflow {

/// Bad preset name or override; the CLI maps it to a usage error.
class UsageError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

inline constexpr int kReportSchemaVersion = 1;

/// Preset overrides. Unset optionals take the preset's default.
struct RunOptions {
    std::string preset;
    std::uint64_t seed = 1;
    std::size_t height = 64;
    std::size_t width = 64;
    std::optional<std::size_t> interval;
    std::optional<std::size_t> iterations;
    std::optional<std::size_t> history;
    std::optional<std::size_t> mask_pad;
    std::optional<double> lambda_l1;
    std::optional<double> lambda_ssim;
    bool literal_eq4 = false;
    std::optional<std::filesystem::path> input_dir;
    std::optional<std::filesystem::path> out_dir;
    /// Worker threads for presets over independent sequences; 0 = hardware.
    std::size_t workers = 0;
};

const std::vector<std::string>& preset_names();

/// Runs a preset and returns its report. With `out_dir` set, the report and
/// the preset's flows and masks are written there as well.
nlohmann::json run_preset(const RunOptions& options);

/// The report minus its "timing" section; equal across identical runs.
nlohmann::json without_timing(nlohmann::json report);

}  // namespace rsdflow
