/*
 * stnav: INS/DVL navigation with an error-state EKF and a set-transformer
 * velocity predictor that bridges prolonged DVL outages.
 *
 * C API for the shared library. All functions return stnav_status; on
 * failure a human-readable message is available from stnav_last_error()
 * until the next call on the same thread.
 */
#ifndef STNAV_H
#define STNAV_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum stnav_status {
    STNAV_OK = 0,
    STNAV_ERR_USAGE = 1,   /* bad arguments or configuration */
    STNAV_ERR_DATA = 2,    /* missing/malformed data files */
    STNAV_ERR_NUMERIC = 3  /* numerical failure (e.g. singular system) */
} stnav_status;

/* Opaque, fully-resolved run configuration. */
typedef struct stnav_config stnav_config;

const char* stnav_version(void);

/* Last error message for the calling thread; empty string when none. */
const char* stnav_last_error(void);

/* Parse a JSON configuration document / file. On success *out owns the
 * configuration and must be released with stnav_config_free. */
stnav_status stnav_config_parse(const char* json_text, stnav_config** out);
stnav_status stnav_config_load(const char* path, stnav_config** out);
void stnav_config_free(stnav_config* cfg);

/* Apply a JSON override at a JSON-pointer path, e.g.
 * stnav_config_override(cfg, "/sweep/durations", "[30]"). The document is
 * re-resolved; invalid results are rejected and cfg is left unchanged. */
stnav_status stnav_config_override(stnav_config* cfg, const char* json_pointer,
                                   const char* json_value);

/* Convenience override for the mandatory seed. */
stnav_status stnav_config_set_seed(stnav_config* cfg, uint64_t seed);

/* 16-hex-character hash of the resolved configuration. buf must hold at
 * least 17 bytes. */
stnav_status stnav_config_hash(const stnav_config* cfg, char* buf, size_t buflen);

/* Resolved configuration as pretty-printed JSON; the returned string lives
 * until the configuration is freed or re-resolved. */
const char* stnav_config_resolved_json(const stnav_config* cfg);

/* Generate the configured synthetic missions into out_dir (CSV triple per
 * mission plus manifest.json). */
stnav_status stnav_simulate(const stnav_config* cfg, const char* out_dir);

/* Train the velocity predictor from the missions under data_dir; writes
 * weights.json and loss_history.csv into out_dir. */
stnav_status stnav_train(const stnav_config* cfg, const char* data_dir,
                         const char* out_dir);

/* Run the outage sweep on the evaluation missions; writes scenarios.csv,
 * summary.csv and (if write_svg) trajectory SVGs into out_dir. */
stnav_status stnav_evaluate(const stnav_config* cfg, const char* data_dir,
                            const char* weights_path, const char* out_dir,
                            int write_svg);

/* Re-aggregate a per-scenario CSV into a summary CSV. */
stnav_status stnav_report(const char* scenario_csv, const char* out_summary_csv);

#ifdef __cplusplus
}
#endif

#endif /* STNAV_H */
