#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "measurement.hpp"
#include "registration.hpp"
#include "roi_detection.hpp"
#include "segmentation.hpp"
#include "stack_io.hpp"

namespace lesionquant {

struct AnalysisParams {
    SegmentationParams segmentation;
    RegistrationParams registration;
    RoiParams roi;
    double max_failed_fraction = 0.2;
    int background_margin = 2;
    bool keep_qc = false;  ///< retain intermediates needed for QC images
};

enum class StackStatus { Ok, Flagged, Rejected };
const char* status_name(StackStatus s);

struct StageTimes {
    double load = 0.0, segment = 0.0, registration = 0.0, roi = 0.0, measure = 0.0;
};

struct FrameReport {
    std::size_t index = 0;
    FrameRole role = FrameRole::PostIrradiation;
    bool ok = false;
    std::string failure;
    RigidTransform transform;
    double background = 0.0;
    double mse_initial = 0.0, mse_final = 0.0;
};

struct StackResult {
    std::string id;
    std::string condition;
    std::filesystem::path source;
    StackStatus status = StackStatus::Rejected;
    std::string reason;
    std::vector<std::string> warnings;
    std::vector<FrameReport> frames;
    std::optional<IntensityCurve> curve;
    std::optional<RoiDetection> detection;
    StageTimes times;
    // QC only
    std::optional<SegmentedFrame> reference_segmentation;
    Frame reference_frame;
};

/// Full single-stack analysis. Never throws for data-dependent failures;
/// those become a Rejected status with a reason.
StackResult analyze_stack(const ImageStack& stack, const AnalysisParams& params = {});

struct InputGroup {
    std::string condition;  ///< empty for the default group
    std::string pattern;    ///< path with '*' / '?' wildcards in the file name
};

struct RunConfig {
    std::vector<InputGroup> inputs;
    int roi_width = 20;
    int roi_height = 180;
    double frame_interval_s = 6.5;
    std::string layout = "default";
    bool qc = false;
    std::filesystem::path output_dir = "out";
    int jobs = 1;
};

/// Relative paths in the file are resolved against its directory. Unknown
/// keys and invalid values throw Config.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig read_run_config(const std::filesystem::path& path);
void validate_run_config(const RunConfig& config);

/// Sorted matches of a single-component wildcard pattern.
std::vector<std::filesystem::path> expand_pattern(const std::string& pattern);

struct StackReport {
    std::string id;
    std::string condition;
    std::string source;
    StackStatus status = StackStatus::Rejected;
    std::string reason;
    std::vector<std::string> warnings;
    StageTimes times;
};

struct RunReport {
    std::vector<StackReport> stacks;
    std::vector<std::string> conditions;
    double wall_seconds = 0.0;
    [[nodiscard]] std::size_t count(StackStatus s) const;
    /// 0 when at least one stack produced a curve, 1 otherwise.
    [[nodiscard]] int exit_code() const;
};

std::string diagnostics_json(const StackResult& result, const AnalysisParams& params);
std::string transforms_csv(const StackResult& result);
std::string report_json(const RunReport& report);

/// Processes every input with a pool of `config.jobs` workers; outputs are
/// written by one thread in input order. `progress` (optional) is called from
/// that thread after each stack.
RunReport run_batch(const RunConfig& config, const std::function<void(const StackReport&)>& progress = {});

}  // namespace lesionquant
