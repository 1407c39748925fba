/* C interface of the lidarsphere library.
 *
 * Every function that can fail returns an ls_status; on failure the message is
 * available from ls_last_error() on the calling thread until the next call.
 * Objects are opaque handles released with their matching _free function.
 * Strings returned through char** are owned by the caller and released with
 * ls_string_free().
 */
#ifndef LIDARSPHERE_H
#define LIDARSPHERE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(LIDARSPHERE_BUILD)
#define LS_API __declspec(dllexport)
#else
#define LS_API __declspec(dllimport)
#endif
#else
#define LS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ls_status {
  LS_OK = 0,
  LS_ERR_INVALID_ARGUMENT = 1,
  LS_ERR_CONFIG = 2,
  LS_ERR_DATA = 3,
  LS_ERR_INVARIANT = 4,
  LS_ERR_IO = 5,
  LS_ERR_INTERNAL = 6
} ls_status;

typedef struct ls_config ls_config;
typedef struct ls_pipeline ls_pipeline;
typedef struct ls_cloud ls_cloud;
typedef struct ls_projection ls_projection;

LS_API const char* ls_version(void);
LS_API const char* ls_last_error(void);
LS_API const char* ls_status_name(ls_status status);
/* 0 success, 2 configuration or argument error, 3 data or I/O error,
 * 4 internal invariant violation. */
LS_API int ls_status_exit_code(ls_status status);
LS_API void ls_string_free(char* s);
/* "debug", "info", "warn", "error" or "off". */
LS_API ls_status ls_set_log_level(const char* level);

/* Pipeline configuration (JSON document with a "version" field). */
LS_API ls_status ls_config_default(ls_config** out);
LS_API ls_status ls_config_load(const char* path, ls_config** out);
LS_API ls_status ls_config_parse(const char* json, ls_config** out);
/* Dotted key ("refine.tau") and a JSON literal or bare string. */
LS_API ls_status ls_config_set(ls_config* config, const char* key, const char* value);
LS_API ls_status ls_config_to_json(const ls_config* config, char** out);
LS_API void ls_config_free(ls_config* config);

/* Stage names: synth, project, density, featurize, reduce, fuse, backproject,
 * refine, sphere, eval and run (project through eval). The report is JSON. */
LS_API ls_status ls_pipeline_create(const ls_config* config, ls_pipeline** out);
LS_API ls_status ls_pipeline_run(ls_pipeline* pipeline, const char* stage, char** report);
LS_API ls_status ls_pipeline_stage_names(char** json);
LS_API void ls_pipeline_free(ls_pipeline* pipeline);

LS_API ls_status ls_cloud_load(const char* path, ls_cloud** out);
LS_API size_t ls_cloud_size(const ls_cloud* cloud);
LS_API void ls_cloud_free(ls_cloud* cloud);

/* Angles in degrees; zenith and azimuth intervals are half-open. */
LS_API ls_status ls_grid_dims(double resolution_deg, double zenith_min, double zenith_max, double azimuth_min,
                              double azimuth_max, size_t* height, size_t* width);
LS_API ls_status ls_project(const ls_cloud* cloud, double resolution_deg, double zenith_min, double zenith_max,
                            double azimuth_min, double azimuth_max, unsigned workers, ls_projection** out);
LS_API ls_status ls_projection_dims(const ls_projection* projection, size_t* height, size_t* width);
/* Mode of the per-pixel point-count histogram and the number of pixels holding
 * more than one point. */
LS_API ls_status ls_projection_density(const ls_projection* projection, size_t* mode, size_t* pixels_above_1);
LS_API void ls_projection_free(ls_projection* projection);
LS_API ls_status ls_virtual_sphere_count(double resolution_deg, double zenith_min, double zenith_max,
                                         double azimuth_min, double azimuth_max, size_t* count);

/* Logits laid out model-major, then class-major planes of `pixels` values.
 * Output arrays hold `pixels` entries (nats). */
LS_API ls_status ls_uncertainty(const double* logits, size_t models, size_t classes, size_t pixels, double* total,
                                double* expected, double* epistemic);
/* Metrics over all n entries; pass exclude_void to drop ground-truth class 0. */
LS_API ls_status ls_metrics(const uint8_t* gt, const uint8_t* pred, size_t n, size_t classes, int exclude_void,
                            double* oacc, double* macc, double* miou);
LS_API ls_status ls_auprc(const double* score, const uint8_t* errors, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif /* LIDARSPHERE_H */
