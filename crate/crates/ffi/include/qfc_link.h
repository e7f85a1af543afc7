#ifndef QFC_LINK_H
#define QFC_LINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum QfcStatus {
  QFC_STATUS_OK = 0,
  // A required pointer argument was null.
  QFC_STATUS_NULL_POINTER = 1,
  // An input violated a precondition.
  QFC_STATUS_DOMAIN = 2,
  // A numerical routine failed to converge.
  QFC_STATUS_NUMERIC = 3,
  // A least-squares fit failed.
  QFC_STATUS_FIT = 4,
  // A Bell schedule is missing expectations.
  QFC_STATUS_INCOMPLETE = 5,
  // Internal error; the library state is unchanged.
  QFC_STATUS_PANIC = 6,
} QfcStatus;

// Opaque chained-inequality schedule with per-term expectations.
typedef struct QfcBellSchedule QfcBellSchedule;

// Opaque validated link budget.
typedef struct QfcLinkBudget QfcLinkBudget;

// Three-wave-mixing process; wavelengths and lengths in metres, `d_eff` in m/V.
typedef struct QfcProcess {
  double lambda_red;
  double lambda_pump;
  double lambda_target;
  double n_red;
  double n_pump;
  double n_target;
  double d_eff;
  double crystal_length;
  double domain_length;
} QfcProcess;

// Monolithic cavity; lengths in metres.
typedef struct QfcCavity {
  double reflectivity_in;
  double reflectivity_out;
  double round_trip_extra_loss;
  double geometric_length;
  double facet_curvature_radius;
  double index_at_pump;
} QfcCavity;

typedef struct QfcCavityFigures {
  double finesse;
  double enhancement;
  double circulating_power;
  double mode_rayleigh_range;
  double focusing_parameter;
} QfcCavityFigures;

// Distance-independent link parameters (see the Rust `LinkBudget`).
typedef struct QfcLinkParams {
  double eta_ext;
  double source_rate_hz;
  double converter_noise_hz;
  double dark_rate_hz;
  double attenuation_db_per_km;
  double filter_width_nm;
  double filter_transmission;
  double detection_efficiency;
} QfcLinkParams;

typedef struct QfcChainedBounds {
  double s_lhv;
  double s_qm;
  double v_crit;
} QfcChainedBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread; empty after success.
// Valid until the next call into the library from the same thread.
const char *qfc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *qfc_version(void);

// `sin²(π/2 · √(P/P_max))`
enum QfcStatus qfc_conversion_efficiency(double p_pump, double p_max, double *eta);

// Boyd–Kleinman factor `h(σ, ξ)`.
enum QfcStatus qfc_bk_factor(double sigma, double xi, double *h);

// `h_m(ξ)`, maximized over the phase mismatch.
enum QfcStatus qfc_h_m(double xi, double *h);

// Focusing parameter maximizing `h_m` on `[lo, hi]`.
enum QfcStatus qfc_optimal_focusing(double lo, double hi, double *xi, double *h);

// Saturation pump power [W] for a process and focusing factor.
enum QfcStatus qfc_p_max(const struct QfcProcess *process, double h, double *p);

// Wavelength width [m] of a frequency width `delta_nu` [Hz] at `lambda` [m].
enum QfcStatus qfc_bandwidth_wavelength(double delta_nu, double lambda, double *width);

enum QfcStatus qfc_cavity_figures(const struct QfcCavity *cavity,
                                  double lambda_pump,
                                  double p_in,
                                  double mode_coupling,
                                  struct QfcCavityFigures *figures);

// Extra round-trip loss reproducing a measured finesse.
enum QfcStatus qfc_infer_round_trip_loss(double finesse, double r_in, double r_out, double *loss);

enum QfcStatus qfc_link_budget_new(const struct QfcLinkParams *params,
                                   struct QfcLinkBudget **handle);

enum QfcStatus qfc_link_budget_snr(const struct QfcLinkBudget *handle, double x_km, double *snr);

// Fiber length [km] at which the SNR falls to `threshold`.
enum QfcStatus qfc_link_budget_distance(const struct QfcLinkBudget *handle,
                                        double threshold,
                                        double *x_km);

// Releases a budget; null is ignored.
void qfc_link_budget_free(struct QfcLinkBudget *handle);

enum QfcStatus qfc_chained_bounds(size_t n, struct QfcChainedBounds *bounds);

// Schedule with the optimal phase settings for `n` settings and no expectations.
enum QfcStatus qfc_bell_schedule_optimal(size_t n, struct QfcBellSchedule **handle);

// Schedule for externally measured expectations.
enum QfcStatus qfc_bell_schedule_unphased(size_t n, struct QfcBellSchedule **handle);

// Number of terms (2N).
size_t qfc_bell_schedule_term_count(const struct QfcBellSchedule *handle);

// Sets correlator `(a, b)`; settings are 1-based.
enum QfcStatus qfc_bell_schedule_set_pair(struct QfcBellSchedule *handle,
                                          size_t a,
                                          size_t b,
                                          double expectation,
                                          double sigma);

// Fills every term with the noise-free fringe expectation at `visibility`.
enum QfcStatus qfc_bell_schedule_fill_model(struct QfcBellSchedule *handle, double visibility);

// Chained sum `S` and its uncertainty; `Incomplete` if any term is unset.
enum QfcStatus qfc_bell_schedule_chained_s(const struct QfcBellSchedule *handle,
                                           double *s,
                                           double *sigma);

// Releases a schedule; null is ignored.
void qfc_bell_schedule_free(struct QfcBellSchedule *handle);

// Normalized g² of a coincidence histogram and its Cauchy–Schwarz
// significance over the thermal bound 2.
enum QfcStatus qfc_g2_normalize(const uint64_t *counts,
                                size_t len,
                                size_t center_bin,
                                double bin_width,
                                double integration_time,
                                size_t peak_half_width,
                                size_t exclusion_half_width,
                                double *g2,
                                double *sigma,
                                double *significance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFC_LINK_H */
