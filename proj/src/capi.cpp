#include "lesionquant/lesionquant.h"

#include <cstring>
#include <new>
#include <string>

#include "error.hpp"
#include "phantom.hpp"
#include "pipeline.hpp"
#include "stack_io.hpp"
#include "verify/suite.hpp"

using namespace lesionquant;

struct lq_stack {
    ImageStack stack;
};

struct lq_config {
    RunConfig config;
};

struct lq_report {
    RunReport report;
};

namespace {

thread_local std::string g_last_error;

lq_status to_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::EmptyInput: return LQ_ERR_INVALID_ARGUMENT;
        case ErrorCode::Io: return LQ_ERR_IO;
        case ErrorCode::Format: return LQ_ERR_FORMAT;
        case ErrorCode::Config: return LQ_ERR_CONFIG;
        case ErrorCode::DegenerateHistogram: return LQ_ERR_DEGENERATE;
        case ErrorCode::NoNucleusFound: return LQ_ERR_NO_NUCLEUS;
        case ErrorCode::ContourExtractionFailed: return LQ_ERR_CONTOUR;
        case ErrorCode::RegistrationDiverged: return LQ_ERR_DIVERGED;
        case ErrorCode::NoPeakFound: return LQ_ERR_NO_PEAK;
        case ErrorCode::StackRejected: return LQ_ERR_REJECTED;
    }
    return LQ_ERR_INTERNAL;
}

lq_status fail(lq_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

// Runs `body`, translating exceptions into status codes and the thread's
// last-error message.
template <class F>
lq_status guarded(F&& body) {
    try {
        g_last_error.clear();
        body();
        return LQ_OK;
    } catch (const Error& e) {
        return fail(to_status(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(LQ_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(LQ_ERR_INTERNAL, e.what());
    }
}

lq_stack_status to_stack_status(StackStatus s) {
    switch (s) {
        case StackStatus::Ok: return LQ_STACK_OK;
        case StackStatus::Flagged: return LQ_STACK_FLAGGED;
        case StackStatus::Rejected: return LQ_STACK_REJECTED;
    }
    return LQ_STACK_REJECTED;
}

lq_frame_role to_role(FrameRole r) {
    switch (r) {
        case FrameRole::PreIrradiation: return LQ_ROLE_PRE;
        case FrameRole::Dark: return LQ_ROLE_DARK;
        case FrameRole::PostIrradiation: return LQ_ROLE_POST;
    }
    return LQ_ROLE_POST;
}

#define LQ_REQUIRE(cond, what) \
    do { \
        if (!(cond)) return fail(LQ_ERR_INVALID_ARGUMENT, what); \
    } while (0)

}  // namespace

extern "C" {

const char* lq_version(void) { return "1.0.0"; }

const char* lq_status_string(lq_status status) {
    switch (status) {
        case LQ_OK: return "ok";
        case LQ_ERR_INVALID_ARGUMENT: return "invalid argument";
        case LQ_ERR_IO: return "i/o error";
        case LQ_ERR_FORMAT: return "unsupported or malformed file";
        case LQ_ERR_CONFIG: return "configuration error";
        case LQ_ERR_NO_NUCLEUS: return "no nucleus found";
        case LQ_ERR_CONTOUR: return "contour extraction failed";
        case LQ_ERR_DIVERGED: return "registration diverged";
        case LQ_ERR_NO_PEAK: return "no peak found";
        case LQ_ERR_DEGENERATE: return "degenerate histogram";
        case LQ_ERR_REJECTED: return "stack rejected";
        case LQ_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* lq_last_error(void) { return g_last_error.c_str(); }

lq_status lq_stack_load(const char* path, const char* layout, double frame_interval_s, lq_stack** out) {
    LQ_REQUIRE(path && out, "lq_stack_load: null argument");
    *out = nullptr;
    return guarded([&] {
        const LayoutSpec spec = parse_layout(layout ? layout : "default", frame_interval_s);
        auto* s = new lq_stack{load_stack(path, spec)};
        *out = s;
    });
}

void lq_stack_free(lq_stack* stack) { delete stack; }

lq_status lq_stack_dimensions(const lq_stack* stack, int* width, int* height, size_t* frames) {
    LQ_REQUIRE(stack, "lq_stack_dimensions: null stack");
    if (width) *width = stack->stack.width();
    if (height) *height = stack->stack.height();
    if (frames) *frames = stack->stack.size();
    return LQ_OK;
}

lq_status lq_stack_pixels(const lq_stack* stack, size_t frame, const float** pixels) {
    LQ_REQUIRE(stack && pixels, "lq_stack_pixels: null argument");
    LQ_REQUIRE(frame < stack->stack.size(), "lq_stack_pixels: frame index out of range");
    *pixels = stack->stack.frames[frame].pixels.data();
    return LQ_OK;
}

lq_status lq_stack_frame_info(const lq_stack* stack, size_t frame, lq_frame_role* role, double* time_s) {
    LQ_REQUIRE(stack, "lq_stack_frame_info: null stack");
    LQ_REQUIRE(frame < stack->stack.size(), "lq_stack_frame_info: frame index out of range");
    if (role) *role = to_role(stack->stack.roles[frame]);
    if (time_s) *time_s = stack->stack.timestamps_s[frame];
    return LQ_OK;
}

lq_status lq_config_load(const char* path, lq_config** out) {
    LQ_REQUIRE(path && out, "lq_config_load: null argument");
    *out = nullptr;
    return guarded([&] { *out = new lq_config{read_run_config(path)}; });
}

lq_status lq_config_create(lq_config** out) {
    LQ_REQUIRE(out, "lq_config_create: null argument");
    return guarded([&] { *out = new lq_config{}; });
}

void lq_config_free(lq_config* config) { delete config; }

lq_status lq_config_add_input(lq_config* config, const char* condition, const char* pattern) {
    LQ_REQUIRE(config && pattern, "lq_config_add_input: null argument");
    return guarded([&] { config->config.inputs.push_back({condition ? condition : "", pattern}); });
}

lq_status lq_config_set_roi(lq_config* config, int width, int height) {
    LQ_REQUIRE(config, "lq_config_set_roi: null config");
    if (width < 1 || height < 1) return fail(LQ_ERR_CONFIG, "ROI width and height must be positive");
    config->config.roi_width = width;
    config->config.roi_height = height;
    return LQ_OK;
}

lq_status lq_config_get_roi(const lq_config* config, int* width, int* height) {
    LQ_REQUIRE(config, "lq_config_get_roi: null config");
    if (width) *width = config->config.roi_width;
    if (height) *height = config->config.roi_height;
    return LQ_OK;
}

lq_status lq_config_set_qc(lq_config* config, int enabled) {
    LQ_REQUIRE(config, "lq_config_set_qc: null config");
    config->config.qc = enabled != 0;
    return LQ_OK;
}

lq_status lq_config_set_jobs(lq_config* config, int jobs) {
    LQ_REQUIRE(config, "lq_config_set_jobs: null config");
    if (jobs < 1) return fail(LQ_ERR_CONFIG, "jobs must be at least 1");
    config->config.jobs = jobs;
    return LQ_OK;
}

lq_status lq_config_set_output_dir(lq_config* config, const char* dir) {
    LQ_REQUIRE(config && dir, "lq_config_set_output_dir: null argument");
    return guarded([&] { config->config.output_dir = dir; });
}

lq_status lq_config_set_layout(lq_config* config, const char* layout, double frame_interval_s) {
    LQ_REQUIRE(config && layout, "lq_config_set_layout: null argument");
    return guarded([&] {
        try {
            parse_layout(layout, frame_interval_s);
        } catch (const Error& e) {
            throw Error(ErrorCode::Config, e.what());
        }
        config->config.layout = layout;
        config->config.frame_interval_s = frame_interval_s;
    });
}

lq_status lq_run_batch(const lq_config* config, lq_progress_fn progress, void* user, lq_report** out) {
    LQ_REQUIRE(config && out, "lq_run_batch: null argument");
    *out = nullptr;
    return guarded([&] {
        std::function<void(const StackReport&)> cb;
        if (progress) {
            cb = [&](const StackReport& s) { progress(s.id.c_str(), to_stack_status(s.status), s.reason.c_str(), user); };
        }
        *out = new lq_report{run_batch(config->config, cb)};
    });
}

void lq_report_free(lq_report* report) { delete report; }

size_t lq_report_count(const lq_report* report) { return report ? report->report.stacks.size() : 0; }

const char* lq_report_stack_id(const lq_report* report, size_t index) {
    if (!report || index >= report->report.stacks.size()) return nullptr;
    return report->report.stacks[index].id.c_str();
}

lq_stack_status lq_report_stack_status(const lq_report* report, size_t index) {
    if (!report || index >= report->report.stacks.size()) return LQ_STACK_REJECTED;
    return to_stack_status(report->report.stacks[index].status);
}

const char* lq_report_stack_reason(const lq_report* report, size_t index) {
    if (!report || index >= report->report.stacks.size()) return nullptr;
    return report->report.stacks[index].reason.c_str();
}

int lq_report_exit_code(const lq_report* report) { return report ? report->report.exit_code() : 1; }

lq_status lq_phantom_generate(const char* spec_path, uint64_t seed, const char* out_dir, char* path_out,
                              size_t path_capacity) {
    LQ_REQUIRE(spec_path && out_dir, "lq_phantom_generate: null argument");
    return guarded([&] {
        const PhantomSpec spec = read_phantom_spec(spec_path);
        const std::string written = write_phantom(generate_phantom(spec, seed), spec, seed, out_dir).string();
        if (path_out && path_capacity > written.size()) std::memcpy(path_out, written.c_str(), written.size() + 1);
    });
}

lq_status lq_verify(const char* criteria, uint64_t seed, lq_line_fn line, void* user, int* all_passed) {
    return guarded([&] {
        bool ok = true;
        verify::run(criteria ? criteria : "all", seed, [&](const verify::CriterionResult& r) {
            ok = ok && r.passed;
            if (line) line(verify::format_line(r).c_str(), user);
        });
        if (all_passed) *all_passed = ok ? 1 : 0;
    });
}

}  // extern "C"
