/* Semantic localization toolkit - public C interface.
 *
 * All functions return a semloc_status; on failure the thread-local message
 * from semloc_last_error() describes what went wrong. Objects returned
 * through out-parameters are owned by the caller and released with the
 * matching *_free function. Handles are opaque; NULL is never a valid
 * handle argument unless stated otherwise.
 */
#ifndef SEMLOC_H
#define SEMLOC_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum semloc_status {
    SEMLOC_OK = 0,
    SEMLOC_ERR_INVALID_ARGUMENT = 1, /* bad parameters or malformed config values */
    SEMLOC_ERR_DATA = 2,             /* unreadable/ill-formed input data */
    SEMLOC_ERR_NUMERIC = 3,          /* numerical failure during optimization */
    SEMLOC_ERR_IO = 4,               /* filesystem failure */
    SEMLOC_ERR_INTERNAL = 5
} semloc_status;

typedef struct semloc_config semloc_config;         /* flat key = value configuration */
typedef struct semloc_map semloc_map;               /* semantic map (lane points + poles) */
typedef struct semloc_trajectory semloc_trajectory; /* timestamped pose sequence */
typedef struct semloc_report semloc_report;         /* named scalar results */

const char* semloc_version(void);

/* Message for the most recent failure on this thread; never NULL. */
const char* semloc_last_error(void);

/* ---- configuration ---- */
semloc_status semloc_config_create(semloc_config** out);
semloc_status semloc_config_load(const char* path, semloc_config** out);
semloc_status semloc_config_parse(const char* text, semloc_config** out);
semloc_status semloc_config_set(semloc_config* cfg, const char* key, const char* value);
void semloc_config_free(semloc_config* cfg);

/* ---- semantic maps (SEMMAP 1 text format) ---- */
semloc_status semloc_map_load(const char* path, semloc_map** out);
semloc_status semloc_map_save(const semloc_map* map, const char* path);
size_t semloc_map_lane_point_count(const semloc_map* map);
size_t semloc_map_pole_count(const semloc_map* map);
void semloc_map_free(semloc_map* map);

/* ---- trajectories (one `timestamp tx ty tz qx qy qz qw` line per pose) ---- */
semloc_status semloc_trajectory_load(const char* path, semloc_trajectory** out);
semloc_status semloc_trajectory_save(const semloc_trajectory* traj, const char* path);
size_t semloc_trajectory_size(const semloc_trajectory* traj);
void semloc_trajectory_free(semloc_trajectory* traj);

/* ---- reports ---- */
size_t semloc_report_size(const semloc_report* report);
const char* semloc_report_key(const semloc_report* report, size_t index);
double semloc_report_value(const semloc_report* report, size_t index);
/* Returns SEMLOC_ERR_INVALID_ARGUMENT when the key is absent. */
semloc_status semloc_report_get(const semloc_report* report, const char* key, double* out);
semloc_status semloc_report_save(const semloc_report* report, const char* path);
void semloc_report_free(semloc_report* report);

/* ---- pipelines ---- */

/* Generate a synthetic world per the config and write map.semmap,
 * cloud.cloud, dataset.txt and gt.traj into out_dir. */
semloc_status semloc_simulate(const semloc_config* cfg, const char* out_dir);

/* Build a semantic map from a CLOUD 1 labeled point cloud. cfg may be NULL
 * for defaults. */
semloc_status semloc_build_map(const char* cloud_path, const semloc_config* cfg,
                               semloc_map** out);

/* Localize a dataset against a map. cfg may be NULL for defaults;
 * diagnostics_path may be NULL to skip the per-frame diagnostics file. */
semloc_status semloc_localize(const semloc_map* map, const char* dataset_path,
                              const semloc_config* cfg, const char* diagnostics_path,
                              semloc_trajectory** out);

/* Compare an estimate against ground truth on timestamp-matched frames. */
semloc_status semloc_evaluate(const semloc_trajectory* estimate,
                              const semloc_trajectory* ground_truth, semloc_report** out);

/* Reconstruction-model self-check: deviation sweeps against the exact
 * ray-plane model. The report carries the measured maxima plus a `pass`
 * entry (1 or 0) reflecting the built-in bounds. */
semloc_status semloc_ipm_check(const semloc_config* cfg, semloc_report** out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SEMLOC_H */
