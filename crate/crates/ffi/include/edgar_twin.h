#ifndef EDGAR_TWIN_H
#define EDGAR_TWIN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define ET_CLAMPED_SPEED 1

#define ET_CLAMPED_STEERING_RATE 2

#define ET_CLAMPED_ACCEL 4

/**
 * Driving modes.
 */
typedef enum EtMode {
  ET_MODE_SERIES = 0,
  ET_MODE_MEASUREMENT = 1,
  ET_MODE_AUTONOMOUS = 2,
  ET_MODE_HIGH_DYNAMIC = 3,
} EtMode;

/**
 * Result of every fallible call.
 */
typedef enum EtStatus {
  ET_STATUS_OK = 0,
  ET_STATUS_NULL_POINTER = 1,
  ET_STATUS_INVALID_UTF8 = 2,
  ET_STATUS_INVALID_ARGUMENT = 3,
  ET_STATUS_CONFIG = 4,
  ET_STATUS_RUNTIME = 5,
  ET_STATUS_DIVERGENCE = 6,
  ET_STATUS_IO = 7,
  /**
   * The run completed but a check failed
   */
  ET_STATUS_CHECK_FAILED = 8,
  ET_STATUS_PANIC = 9,
} EtStatus;

typedef struct EtReport EtReport;

typedef struct EtRig EtRig;

typedef struct EtScenario EtScenario;

typedef struct EtStore EtStore;

typedef struct EtVehicle EtVehicle;

/**
 * Planar body state; velocities in the body frame.
 */
typedef struct EtState {
  double x;
  double y;
  double psi;
  double v_x;
  double v_y;
  double psi_dot;
} EtState;

/**
 * Speed target [m/s], steering-wheel rate [rad/s], acceleration [m/s^2].
 */
typedef struct EtCommand {
  double speed_target;
  double steering_rate;
  double accel;
} EtCommand;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *et_last_error(void);

/**
 * Library version, static storage.
 */
const char *et_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void et_string_free(char *s);

/**
 * The EDGAR van with its identified parameters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum EtStatus et_vehicle_new_edgar(struct EtVehicle **out);

/**
 * Vehicle from TOML text; missing keys keep the EDGAR values.
 *
 * # Safety
 * `toml` must be a NUL-terminated string, `out` a valid pointer.
 */
enum EtStatus et_vehicle_parse(const char *toml, struct EtVehicle **out);

/**
 * # Safety
 * `v` must come from this library and not have been freed, or be null.
 */
void et_vehicle_free(struct EtVehicle *v);

/**
 * Static front and rear axle loads [N].
 *
 * # Safety
 * All pointers must be valid.
 */
enum EtStatus et_vehicle_axle_loads(const struct EtVehicle *v, double *f_z_f, double *f_z_r);

/**
 * One RK4 step of `dt` seconds with road-wheel angle `delta` [rad] and net
 * drive force `f_x` [N] held. `state` is updated in place.
 *
 * # Safety
 * All pointers must be valid.
 */
enum EtStatus et_vehicle_step(const struct EtVehicle *v,
                              struct EtState *state,
                              double delta,
                              double f_x,
                              double dt);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum EtStatus et_rig_new_edgar(struct EtRig **out);

/**
 * # Safety
 * `toml` must be a NUL-terminated string, `out` a valid pointer.
 */
enum EtStatus et_rig_parse(const char *toml, struct EtRig **out);

/**
 * # Safety
 * `r` must come from this library and not have been freed, or be null.
 */
void et_rig_free(struct EtRig *r);

/**
 * Number of physical devices.
 *
 * # Safety
 * All pointers must be valid.
 */
enum EtStatus et_rig_device_count(const struct EtRig *r, size_t *out);

/**
 * Whether the sensor (device or pattern id) sees the vehicle-frame point,
 * including occlusion by the vehicle body.
 *
 * # Safety
 * All pointers must be valid; `sensor_id` NUL-terminated.
 */
enum EtStatus et_rig_is_point_visible(const struct EtRig *r,
                                      const char *sensor_id,
                                      double x,
                                      double y,
                                      double z,
                                      bool *out);

/**
 * Clamps `cmd` to the default limits of `mode`. `flags` receives a bit set
 * of `ET_CLAMPED_*`. Series and measurement modes fail with `Config`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum EtStatus et_limit_command(enum EtMode mode,
                               struct EtCommand cmd,
                               struct EtCommand *out,
                               uint32_t *flags);

/**
 * Parses a scenario file. A negative `seed` keeps the file's seed.
 *
 * # Safety
 * `path` must be NUL-terminated, `out` valid.
 */
enum EtStatus et_scenario_load(const char *path, int64_t seed, struct EtScenario **out);

/**
 * Parses scenario text; relative paths resolve against `base_dir`
 * (the current directory when null).
 *
 * # Safety
 * `text` and a non-null `base_dir` must be NUL-terminated, `out` valid.
 */
enum EtStatus et_scenario_parse(const char *text, const char *base_dir, struct EtScenario **out);

/**
 * # Safety
 * `s` must come from this library and not have been freed, or be null.
 */
void et_scenario_free(struct EtScenario *s);

/**
 * Effective configuration as TOML. Free with `et_string_free`.
 *
 * # Safety
 * `s` must be a valid handle.
 */
char *et_scenario_effective_config(const struct EtScenario *s);

/**
 * Runs the scenario. With a non-null `out_dir` the report, CSVs and ride
 * are written there. A report is returned through `out` whenever the run
 * got far enough to produce one: on success, on `CheckFailed`, and as a
 * partial report on `Runtime`/`Divergence`.
 *
 * # Safety
 * `s` and `out` must be valid; a non-null `out_dir` NUL-terminated.
 */
enum EtStatus et_scenario_run(const struct EtScenario *s,
                              const char *out_dir,
                              struct EtReport **out);

/**
 * # Safety
 * `r` must come from this library and not have been freed, or be null.
 */
void et_report_free(struct EtReport *r);

/**
 * report.txt contents. Free with `et_string_free`.
 *
 * # Safety
 * `r` must be a valid handle.
 */
char *et_report_render(const struct EtReport *r);

/**
 * Process exit code the CLI would use for this report: 0 or 3.
 *
 * # Safety
 * `r` must be a valid handle.
 */
int32_t et_report_exit_code(const struct EtReport *r);

/**
 * Contents of one CSV artifact (e.g. "dynamics.csv"); null if absent.
 * Free with `et_string_free`.
 *
 * # Safety
 * `r` must be a valid handle, `name` NUL-terminated.
 */
char *et_report_artifact(const struct EtReport *r, const char *name);

/**
 * # Safety
 * `dir` must be NUL-terminated, `out` valid.
 */
enum EtStatus et_store_load(const char *dir, struct EtStore **out);

/**
 * # Safety
 * `s` must come from this library and not have been freed, or be null.
 */
void et_store_free(struct EtStore *s);

/**
 * Number of integrity violations; the rendered list is the last error
 * message when it is nonzero.
 *
 * # Safety
 * All pointers must be valid.
 */
enum EtStatus et_store_check(const struct EtStore *s, size_t *violations);

/**
 * Scene ids matching a tag expression, one per line. Free with
 * `et_string_free`.
 *
 * # Safety
 * All pointers must be valid; `expr` NUL-terminated.
 */
enum EtStatus et_store_query(const struct EtStore *s, const char *expr, char **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* EDGAR_TWIN_H */
