#ifndef CDT_H
#define CDT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CdtStatus {
  CDT_STATUS_OK = 0,
  CDT_STATUS_NULL_POINTER = 1,
  CDT_STATUS_INVALID_ARGUMENT = 2,
  CDT_STATUS_NUMERICAL_GUARD = 3,
  CDT_STATUS_BUFFER_TOO_SMALL = 4,
  CDT_STATUS_PANIC = 5,
} CdtStatus;

typedef enum CdtDirection {
  CDT_DIRECTION_LEFT = 0,
  CDT_DIRECTION_RIGHT = 1,
} CdtDirection;

typedef struct CdtDrive CdtDrive;

typedef struct CdtFloquet CdtFloquet;

typedef struct CdtModel CdtModel;

typedef struct CdtTrajectory CdtTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length in bytes of the last error message on this thread, excluding the
// terminating NUL; 0 if there is none.
size_t cdt_last_error_length(void);

// Copies the last error message (NUL-terminated, truncated to fit) into
// `buf`. Returns the number of bytes written excluding the NUL.
size_t cdt_last_error_message(char *buf, size_t capacity);

// Zeroth-order Bessel function of the first kind.
double cdt_bessel_j0(double x);

// The first `n` positive zeros of `J0`, written to `buf` (capacity `n`).
enum CdtStatus cdt_j0_roots(size_t n, double *buf);

enum CdtStatus cdt_model_new(size_t n_sites, double omega, double v, struct CdtModel **out_model);

void cdt_model_free(struct CdtModel *model);

// Drive `A sin(w t)` on the sites whose `mask` byte is nonzero.
enum CdtStatus cdt_drive_new(const uint8_t *mask,
                             size_t n_sites,
                             double amplitude,
                             double frequency,
                             struct CdtDrive **out_drive);

void cdt_drive_free(struct CdtDrive *drive);

// Evolves a particle starting on `initial_site` from `t0` to `t1`.
enum CdtStatus cdt_evolve(const struct CdtModel *model,
                          const struct CdtDrive *drive,
                          size_t initial_site,
                          double t0,
                          double t1,
                          double dt,
                          size_t sample_every,
                          struct CdtTrajectory **out_traj);

void cdt_trajectory_free(struct CdtTrajectory *traj);

// Number of samples; 0 for a null handle.
size_t cdt_trajectory_len(const struct CdtTrajectory *traj);

size_t cdt_trajectory_n_sites(const struct CdtTrajectory *traj);

// Largest deviation of the norm from 1; NaN for a null handle.
double cdt_trajectory_norm_drift(const struct CdtTrajectory *traj);

enum CdtStatus cdt_trajectory_times(const struct CdtTrajectory *traj,
                                    double *buf,
                                    size_t capacity,
                                    size_t *out_len);

// Populations, row-major: `len` rows of `n_sites`.
enum CdtStatus cdt_trajectory_populations(const struct CdtTrajectory *traj,
                                          double *buf,
                                          size_t capacity,
                                          size_t *out_len);

// Final amplitudes as interleaved `(re, im)` pairs.
enum CdtStatus cdt_trajectory_final_amplitudes(const struct CdtTrajectory *traj,
                                               double *buf,
                                               size_t capacity,
                                               size_t *out_len);

// Floquet analysis over one period; `steps_per_period = 0` uses the default.
enum CdtStatus cdt_floquet_analyze(const struct CdtModel *model,
                                   const struct CdtDrive *drive,
                                   size_t steps_per_period,
                                   struct CdtFloquet **out_floquet);

void cdt_floquet_free(struct CdtFloquet *f);

size_t cdt_floquet_n_modes(const struct CdtFloquet *f);

// Quasienergies in ascending order, folded into `(-w/2, w/2]`.
enum CdtStatus cdt_floquet_quasienergies(const struct CdtFloquet *f,
                                         double *buf,
                                         size_t capacity,
                                         size_t *out_len);

// Site probabilities, row-major by mode: entry `k * n + j` is mode `k` on site `j`.
enum CdtStatus cdt_floquet_site_probabilities(const struct CdtFloquet *f,
                                              double *buf,
                                              size_t capacity,
                                              size_t *out_len);

// Runs the directed-transport protocol from `start_site` and reports the
// final population on the destination site.
enum CdtStatus cdt_motor_run(const struct CdtModel *model,
                             size_t start_site,
                             enum CdtDirection direction,
                             size_t n_hops,
                             double amplitude,
                             double frequency,
                             double dt,
                             struct CdtTrajectory **out_traj,
                             double *out_fidelity);

// Runs the beam splitter around `center` and reports the summed final
// population on the two edge sites `center -+ (n_stages + 1)`.
enum CdtStatus cdt_splitter_run(const struct CdtModel *model,
                                size_t center,
                                size_t n_stages,
                                double amplitude,
                                double frequency,
                                double dt,
                                struct CdtTrajectory **out_traj,
                                double *out_fidelity);

// Nearest and next-nearest couplings of an unmodulated array of
// super-Gaussian guides, by eigen-splitting at the default grid step.
enum CdtStatus cdt_extract_couplings(double spacing,
                                     double width,
                                     double contrast,
                                     double *out_omega,
                                     double *out_v);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CDT_H */
