#ifndef LORA_COEXIST_H
#define LORA_COEXIST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of an API call.
typedef enum LcStatus {
  LC_STATUS_OK = 0,
  // A required pointer argument was null.
  LC_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  LC_STATUS_INVALID_UTF8 = 2,
  // The configuration or a parameter was rejected.
  LC_STATUS_CONFIG = 3,
  // The simulation detected an internal inconsistency.
  LC_STATUS_INVARIANT = 4,
  // The requested metric is undefined, e.g. DER of a silent network.
  LC_STATUS_UNDEFINED = 5,
  // An index was out of range.
  LC_STATUS_OUT_OF_RANGE = 6,
  // A Rust panic was caught at the boundary.
  LC_STATUS_PANIC = 7,
} LcStatus;

// Counters of a finished run.
typedef struct LcRun LcRun;

// A parsed and validated experiment configuration.
typedef struct LcScenario LcScenario;

// Message counters for one network.
typedef struct LcNetworkStats {
  uint64_t sent;
  uint64_t received;
  uint64_t lost_collision;
  uint64_t lost_no_slot;
  uint64_t lost_below_sensitivity;
} LcNetworkStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *lc_version(void);

// Copies the last error message of this thread into `buf`.
//
// Returns the length the message needs including its terminating NUL, or 0
// if there is no message. At most `len` bytes are written and the copy is
// always NUL-terminated when `len > 0`.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t lc_last_error_message(char *buf, size_t len);

// Parses a TOML configuration and validates every sweep point.
//
// # Safety
// `toml` must be null or a NUL-terminated string; `out` must be null or
// point to writable storage for a pointer.
enum LcStatus lc_scenario_from_toml(const char *toml, struct LcScenario **out);

// Releases a scenario. Null is ignored.
//
// # Safety
// `scenario` must be null or a handle from [`lc_scenario_from_toml`] that
// has not been freed.
void lc_scenario_free(struct LcScenario *scenario);

// Number of networks (measured plus interferers) in the base layout.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum LcStatus lc_scenario_network_count(const struct LcScenario *scenario, size_t *out);

// Configured simulated duration in milliseconds.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum LcStatus lc_scenario_duration_ms(const struct LcScenario *scenario, double *out);

// Runs the base layout of `scenario` with `seed` for `duration_ms`.
//
// A non-positive or non-finite duration selects the configured one.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum LcStatus lc_run(const struct LcScenario *scenario,
                     uint64_t seed,
                     double duration_ms,
                     struct LcRun **out);

// Releases a run. Null is ignored.
//
// # Safety
// `run` must be null or a handle from [`lc_run`] that has not been freed.
void lc_run_free(struct LcRun *run);

// Number of networks in a finished run; network 0 is the measured one.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum LcStatus lc_run_network_count(const struct LcRun *run, size_t *out);

// Message counters of `network`.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum LcStatus lc_run_network_stats(const struct LcRun *run,
                                   size_t network,
                                   struct LcNetworkStats *out);

// Data Extraction Rate of `network`.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum LcStatus lc_run_der(const struct LcRun *run, size_t network, double *out);

// Time on air of one packet with explicit header, CRC and an 8-symbol preamble.
//
// `cr` is the coding-rate offset 1..4 (4/5..4/8).
//
// # Safety
// `out` must be writable.
enum LcStatus lc_airtime_ms(uint8_t sf,
                            uint32_t bw_hz,
                            uint8_t cr,
                            uint32_t payload_bytes,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LORA_COEXIST_H */
