// lesionquant command-line front end. Talks to the library only through the
// C API.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "lesionquant/lesionquant.h"

namespace {

constexpr int kExitAllFailed = 1;
constexpr int kExitConfig = 2;

const char* stack_status_name(lq_stack_status s) {
    switch (s) {
        case LQ_STACK_OK: return "ok";
        case LQ_STACK_FLAGGED: return "flagged";
        case LQ_STACK_REJECTED: return "rejected";
    }
    return "?";
}

int report_error(const char* what, lq_status status) {
    const char* detail = lq_last_error();
    std::fprintf(stderr, "lesionquant: %s: %s\n", what, *detail ? detail : lq_status_string(status));
    return status == LQ_ERR_CONFIG || status == LQ_ERR_INVALID_ARGUMENT ? kExitConfig : kExitAllFailed;
}

void print_progress(const char* id, lq_stack_status status, const char* reason, void*) {
    if (reason && *reason)
        std::printf("%s: %s (%s)\n", id, stack_status_name(status), reason);
    else
        std::printf("%s: %s\n", id, stack_status_name(status));
    std::fflush(stdout);
}

void print_line(const char* line, void*) {
    std::printf("%s\n", line);
    std::fflush(stdout);
}

struct AnalyzeOptions {
    std::string config;
    int roi_width = 0;
    int roi_height = 0;
    bool qc = false;
    int jobs = 0;
    std::string out;
};

int run_analyze(const AnalyzeOptions& o) {
    lq_config* config = nullptr;
    lq_status st = lq_config_load(o.config.c_str(), &config);
    if (st != LQ_OK) return report_error("configuration", st);

    auto check = [&](lq_status s) {
        if (s != LQ_OK && st == LQ_OK) st = s;
    };
    if (o.roi_width > 0 || o.roi_height > 0) {
        // Each override replaces only its own dimension.
        int w = 0, h = 0;
        check(lq_config_get_roi(config, &w, &h));
        check(lq_config_set_roi(config, o.roi_width > 0 ? o.roi_width : w, o.roi_height > 0 ? o.roi_height : h));
    }
    if (o.qc) check(lq_config_set_qc(config, 1));
    if (o.jobs > 0) check(lq_config_set_jobs(config, o.jobs));
    if (!o.out.empty()) check(lq_config_set_output_dir(config, o.out.c_str()));
    if (st != LQ_OK) {
        lq_config_free(config);
        return report_error("configuration", st);
    }

    lq_report* report = nullptr;
    st = lq_run_batch(config, print_progress, nullptr, &report);
    lq_config_free(config);
    if (st != LQ_OK) return report_error("analysis", st);

    std::size_t ok = 0, flagged = 0, rejected = 0;
    for (std::size_t i = 0; i < lq_report_count(report); ++i) {
        switch (lq_report_stack_status(report, i)) {
            case LQ_STACK_OK: ++ok; break;
            case LQ_STACK_FLAGGED: ++flagged; break;
            case LQ_STACK_REJECTED: ++rejected; break;
        }
    }
    std::printf("%zu stacks: %zu ok, %zu flagged, %zu rejected\n", lq_report_count(report), ok, flagged, rejected);
    const int code = lq_report_exit_code(report) == 0 ? 0 : kExitAllFailed;
    lq_report_free(report);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantify protein accumulation at laser-induced DNA damage in time-lapse stacks"};
    app.set_version_flag("--version", lq_version());
    app.require_subcommand(1);

    AnalyzeOptions analyze;
    auto* cmd_analyze = app.add_subcommand("analyze", "Analyze the stacks listed in a configuration file");
    cmd_analyze->add_option("--config", analyze.config, "Key-value configuration file")->required();
    cmd_analyze->add_option("--roi-width", analyze.roi_width, "ROI width in pixels")->check(CLI::PositiveNumber);
    cmd_analyze->add_option("--roi-height", analyze.roi_height, "ROI height in pixels")->check(CLI::PositiveNumber);
    cmd_analyze->add_flag("--qc", analyze.qc, "Write QC overlays, segmentation stages and transforms");
    cmd_analyze->add_option("--jobs", analyze.jobs, "Stacks processed in parallel")->check(CLI::PositiveNumber);
    cmd_analyze->add_option("--out", analyze.out, "Output directory");

    std::string spec_path, out_dir;
    std::uint64_t phantom_seed = 0;
    auto* cmd_phantom = app.add_subcommand("phantom", "Synthetic stacks with ground truth");
    cmd_phantom->require_subcommand(1);
    auto* cmd_generate = cmd_phantom->add_subcommand("generate", "Generate a phantom stack from a spec file");
    cmd_generate->add_option("--spec", spec_path, "Phantom spec file")->required();
    cmd_generate->add_option("--seed", phantom_seed, "Random seed")->required();
    cmd_generate->add_option("--out", out_dir, "Output directory")->required();

    std::string criteria = "all";
    std::uint64_t verify_seed = 1;
    auto* cmd_verify = app.add_subcommand("verify", "Run the acceptance suite");
    cmd_verify->add_option("--criteria", criteria, "Comma-separated criterion names or numbers, or 'all'");
    cmd_verify->add_option("--seed", verify_seed, "Base random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (*cmd_analyze) return run_analyze(analyze);

    if (*cmd_generate) {
        char path[4096] = {0};
        const lq_status st = lq_phantom_generate(spec_path.c_str(), phantom_seed, out_dir.c_str(), path, sizeof path);
        if (st != LQ_OK) return report_error("phantom", st);
        std::printf("%s\n", path);
        return 0;
    }

    if (*cmd_verify) {
        int passed = 0;
        const lq_status st = lq_verify(criteria.c_str(), verify_seed, print_line, nullptr, &passed);
        if (st != LQ_OK) return report_error("verify", st);
        return passed ? 0 : kExitAllFailed;
    }
    return kExitConfig;
}
