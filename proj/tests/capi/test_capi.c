/* Exercises the public C API end to end: phantom generation, stack loading,
   batch analysis and error reporting. argv[1] is a scratch directory. */

#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/stat.h>

#include "lesionquant/lesionquant.h"

static int failures = 0;

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
            ++failures;                                               \
        }                                                             \
    } while (0)

static void write_text(const char* path, const char* text) {
    FILE* f = fopen(path, "w");
    if (!f) {
        fprintf(stderr, "cannot write %s\n", path);
        exit(2);
    }
    fputs(text, f);
    fclose(f);
}

static int progress_calls = 0;

static void on_progress(const char* id, lq_stack_status status, const char* reason, void* user) {
    (void)reason;
    CHECK(user == &progress_calls);
    CHECK(id != NULL && id[0] != '\0');
    CHECK(status == LQ_STACK_OK || status == LQ_STACK_FLAGGED);
    ++progress_calls;
}

int main(int argc, char** argv) {
    const char* work = argc > 1 ? argv[1] : "capi_work";
    char path[1024], spec_path[1024], cfg_path[1024], stack_path[1024];
    mkdir(work, 0755);

    CHECK(strcmp(lq_version(), "1.0.0") == 0);
    CHECK(strcmp(lq_status_string(LQ_ERR_CONFIG), "configuration error") == 0);

    snprintf(spec_path, sizeof spec_path, "%s/cell.spec", work);
    write_text(spec_path,
               "name = cell\n"
               "width = 160\n"
               "height = 160\n"
               "frames = 8\n"
               "nucleus.a = 50\n"
               "nucleus.b = 44\n"
               "stripe.width = 8\n"
               "stripe.length = 60\n"
               "noise.snr = 10\n"
               "motion.drift_x = 0.2\n"
               "truth.roi_width = 16\n"
               "truth.roi_height = 70\n");

    snprintf(path, sizeof path, "%s/in", work);
    CHECK(lq_phantom_generate(spec_path, 5, path, stack_path, sizeof stack_path) == LQ_OK);
    CHECK(strstr(stack_path, "cell.tif") != NULL);

    /* Stack access. */
    lq_stack* stack = NULL;
    CHECK(lq_stack_load(stack_path, NULL, 6.5, &stack) == LQ_OK);
    if (stack) {
        int w = 0, h = 0;
        size_t n = 0;
        CHECK(lq_stack_dimensions(stack, &w, &h, &n) == LQ_OK);
        CHECK(w == 160 && h == 160 && n == 8);
        lq_frame_role role;
        double t = -1.0;
        CHECK(lq_stack_frame_info(stack, 0, &role, &t) == LQ_OK && role == LQ_ROLE_PRE && t == 0.0);
        CHECK(lq_stack_frame_info(stack, 1, &role, &t) == LQ_OK && role == LQ_ROLE_DARK);
        CHECK(lq_stack_frame_info(stack, 7, &role, &t) == LQ_OK && role == LQ_ROLE_POST && t == 7 * 6.5);
        const float* px = NULL;
        CHECK(lq_stack_pixels(stack, 0, &px) == LQ_OK && px != NULL);
        int in_range = 1;
        for (int i = 0; px && i < w * h; ++i) in_range &= px[i] >= 0.0f && px[i] <= 1.0f;
        CHECK(in_range);
        CHECK(lq_stack_pixels(stack, 8, &px) == LQ_ERR_INVALID_ARGUMENT);
        CHECK(strstr(lq_last_error(), "out of range") != NULL);
        lq_stack_free(stack);
    }

    /* Error codes. */
    lq_stack* missing = NULL;
    snprintf(path, sizeof path, "%s/does-not-exist.tif", work);
    CHECK(lq_stack_load(path, NULL, 6.5, &missing) == LQ_ERR_IO);
    CHECK(missing == NULL);
    CHECK(lq_last_error()[0] != '\0');
    CHECK(lq_stack_load(NULL, NULL, 6.5, &missing) == LQ_ERR_INVALID_ARGUMENT);
    CHECK(lq_stack_load(stack_path, "pre-only", 6.5, &missing) == LQ_ERR_FORMAT);

    snprintf(cfg_path, sizeof cfg_path, "%s/bad.cfg", work);
    write_text(cfg_path, "input = in/*.tif\nroi_widht = 12\n");
    lq_config* bad = NULL;
    CHECK(lq_config_load(cfg_path, &bad) == LQ_ERR_CONFIG);
    CHECK(strstr(lq_last_error(), "roi_widht") != NULL);

    /* Batch from a file. */
    snprintf(cfg_path, sizeof cfg_path, "%s/run.cfg", work);
    write_text(cfg_path,
               "# one condition\n"
               "input.wt = in/*.tif\n"
               "roi_width = 16\n"
               "roi_height = 70\n"
               "output_dir = out\n");
    lq_config* config = NULL;
    CHECK(lq_config_load(cfg_path, &config) == LQ_OK);
    int rw = 0, rh = 0;
    CHECK(lq_config_get_roi(config, &rw, &rh) == LQ_OK && rw == 16 && rh == 70);
    CHECK(lq_config_set_jobs(config, 0) == LQ_ERR_CONFIG);
    CHECK(lq_config_set_jobs(config, 2) == LQ_OK);
    CHECK(lq_config_set_layout(config, "bogus", 6.5) == LQ_ERR_CONFIG);

    lq_report* report = NULL;
    CHECK(lq_run_batch(config, on_progress, &progress_calls, &report) == LQ_OK);
    CHECK(progress_calls == 1);
    CHECK(lq_report_count(report) == 1);
    CHECK(lq_report_stack_id(report, 0) && strcmp(lq_report_stack_id(report, 0), "cell") == 0);
    CHECK(lq_report_stack_id(report, 1) == NULL);
    CHECK(lq_report_exit_code(report) == 0);
    lq_report_free(report);
    lq_config_free(config);

    snprintf(path, sizeof path, "%s/out/cell.curve.csv", work);
    FILE* curve = fopen(path, "r");
    CHECK(curve != NULL);
    if (curve) fclose(curve);
    snprintf(path, sizeof path, "%s/out/aggregate_wt.csv", work);
    FILE* agg = fopen(path, "r");
    CHECK(agg != NULL);
    if (agg) fclose(agg);

    /* Programmatic config with nothing to read fails as a configuration error. */
    lq_config* empty = NULL;
    CHECK(lq_config_create(&empty) == LQ_OK);
    snprintf(path, sizeof path, "%s/none/*.tif", work);
    CHECK(lq_config_add_input(empty, NULL, path) == LQ_OK);
    report = NULL;
    CHECK(lq_run_batch(empty, NULL, NULL, &report) == LQ_ERR_CONFIG);
    CHECK(report == NULL);
    lq_config_free(empty);

    int all = -1;
    CHECK(lq_verify("no-such-criterion", 1, NULL, NULL, &all) == LQ_ERR_INVALID_ARGUMENT);

    if (failures) fprintf(stderr, "%d check(s) failed\n", failures);
    return failures ? 1 : 0;
}
