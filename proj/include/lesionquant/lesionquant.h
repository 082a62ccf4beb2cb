#ifndef LESIONQUANT_H
#define LESIONQUANT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(LQ_BUILDING_LIBRARY)
#    define LQ_API __declspec(dllexport)
#  else
#    define LQ_API __declspec(dllimport)
#  endif
#else
#  define LQ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lq_status {
    LQ_OK = 0,
    LQ_ERR_INVALID_ARGUMENT = 1,
    LQ_ERR_IO = 2,
    LQ_ERR_FORMAT = 3,
    LQ_ERR_CONFIG = 4,
    LQ_ERR_NO_NUCLEUS = 5,
    LQ_ERR_CONTOUR = 6,
    LQ_ERR_DIVERGED = 7,
    LQ_ERR_NO_PEAK = 8,
    LQ_ERR_DEGENERATE = 9,
    LQ_ERR_REJECTED = 10,
    LQ_ERR_INTERNAL = 11
} lq_status;

typedef enum lq_stack_status {
    LQ_STACK_OK = 0,
    LQ_STACK_FLAGGED = 1,
    LQ_STACK_REJECTED = 2
} lq_stack_status;

typedef enum lq_frame_role {
    LQ_ROLE_PRE = 0,
    LQ_ROLE_DARK = 1,
    LQ_ROLE_POST = 2
} lq_frame_role;

typedef struct lq_stack lq_stack;
typedef struct lq_config lq_config;
typedef struct lq_report lq_report;

/* Library version, "major.minor.patch". */
LQ_API const char* lq_version(void);
LQ_API const char* lq_status_string(lq_status status);
/* Message of the last failed call on this thread; "" if none. */
LQ_API const char* lq_last_error(void);

/* Image stacks. `layout` may be NULL for the default layout. */
LQ_API lq_status lq_stack_load(const char* path, const char* layout, double frame_interval_s, lq_stack** out);
LQ_API void lq_stack_free(lq_stack* stack);
LQ_API lq_status lq_stack_dimensions(const lq_stack* stack, int* width, int* height, size_t* frames);
/* Borrowed pointer to width*height normalized intensities, valid until
   lq_stack_free. */
LQ_API lq_status lq_stack_pixels(const lq_stack* stack, size_t frame, const float** pixels);
LQ_API lq_status lq_stack_frame_info(const lq_stack* stack, size_t frame, lq_frame_role* role, double* time_s);

/* Batch configuration. */
LQ_API lq_status lq_config_load(const char* path, lq_config** out);
LQ_API lq_status lq_config_create(lq_config** out);
LQ_API void lq_config_free(lq_config* config);
LQ_API lq_status lq_config_add_input(lq_config* config, const char* condition, const char* pattern);
LQ_API lq_status lq_config_set_roi(lq_config* config, int width, int height);
LQ_API lq_status lq_config_get_roi(const lq_config* config, int* width, int* height);
LQ_API lq_status lq_config_set_qc(lq_config* config, int enabled);
LQ_API lq_status lq_config_set_jobs(lq_config* config, int jobs);
LQ_API lq_status lq_config_set_output_dir(lq_config* config, const char* dir);
LQ_API lq_status lq_config_set_layout(lq_config* config, const char* layout, double frame_interval_s);

/* Runs the batch. `progress` (may be NULL) is called once per stack, in
   input order, from the calling thread. */
typedef void (*lq_progress_fn)(const char* stack_id, lq_stack_status status, const char* reason, void* user);
LQ_API lq_status lq_run_batch(const lq_config* config, lq_progress_fn progress, void* user, lq_report** out);

LQ_API void lq_report_free(lq_report* report);
LQ_API size_t lq_report_count(const lq_report* report);
LQ_API const char* lq_report_stack_id(const lq_report* report, size_t index);
LQ_API lq_stack_status lq_report_stack_status(const lq_report* report, size_t index);
LQ_API const char* lq_report_stack_reason(const lq_report* report, size_t index);
/* 0 when at least one stack succeeded, 1 otherwise. */
LQ_API int lq_report_exit_code(const lq_report* report);

/* Phantom generation: reads a key-value spec and writes <name>.tif,
   <name>.spec and <name>.truth.csv into `out_dir`. The stack path is
   copied into `path_out` when it is non-NULL and large enough. */
LQ_API lq_status lq_phantom_generate(const char* spec_path, uint64_t seed, const char* out_dir, char* path_out,
                                     size_t path_capacity);

/* Acceptance suite. `criteria` selects a subset by name or number (NULL or
   "all" runs everything). `line` receives one pass/fail line per
   criterion. */
typedef void (*lq_line_fn)(const char* line, void* user);
LQ_API lq_status lq_verify(const char* criteria, uint64_t seed, lq_line_fn line, void* user, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif
