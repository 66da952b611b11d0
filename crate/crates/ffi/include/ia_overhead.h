#ifndef IA_OVERHEAD_H
#define IA_OVERHEAD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IaoStatus {
  IAO_STATUS_OK = 0,
  IAO_STATUS_NULL_POINTER = 1,
  IAO_STATUS_INVALID_CONFIG = 2,
  IAO_STATUS_INVALID_BUDGET = 3,
  IAO_STATUS_INVALID_DOPPLER = 4,
  IAO_STATUS_INFEASIBLE_CONFIG = 5,
  IAO_STATUS_NON_CONVERGENCE = 6,
  IAO_STATUS_RANK_DEFICIENCY = 7,
  IAO_STATUS_PILOT_LENGTH = 8,
  IAO_STATUS_SINGULAR_FEEDBACK = 9,
  IAO_STATUS_INFEASIBLE_BUDGET = 10,
  IAO_STATUS_DOMAIN = 11,
  IAO_STATUS_DIMENSION = 12,
  IAO_STATUS_PANIC = 13,
} IaoStatus;

// Opaque link budget handle.
typedef struct IaoLink IaoLink;

// Opaque network configuration handle.
typedef struct IaoNetwork IaoNetwork;

// Integer overhead split and its CSI error variance.
typedef struct IaoSplit {
  uintptr_t forward_training;
  uintptr_t feedback_training;
  uintptr_t feedback;
  double sigma2h;
  // Error variance of the continuous optimum.
  double sigma2h_continuous;
} IaoSplit;

// Optimized overhead fraction.
typedef struct IaoDesign {
  double alpha_star;
  double alpha_unclamped;
  bool clamped;
  double sigma2h;
  // Rate predicted by the optimizer.
  double reff_star;
  // Exact effective rate at `alpha_star`.
  double reff_achieved;
  struct IaoSplit split;
} IaoDesign;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *iao_version(void);

// Message for the last failed call on this thread, or an empty string.
// Valid until the next library call on the same thread.
const char *iao_last_error_message(void);

// # Safety
// `out` must be a valid pointer. Free the handle with [`iao_network_free`].
enum IaoStatus iao_network_new(uintptr_t users,
                               uintptr_t tx_antennas,
                               uintptr_t rx_antennas,
                               uintptr_t streams,
                               struct IaoNetwork **out);

// # Safety
// `net` must come from [`iao_network_new`] and not be freed twice.
void iao_network_free(struct IaoNetwork *net);

// Link budget from total transmit power, feedback power ratio and noise
// variance.
//
// # Safety
// `out` must be a valid pointer. Free the handle with [`iao_link_free`].
enum IaoStatus iao_link_new(double power, double gamma, double noise_var, struct IaoLink **out);

// Link budget from a per-stream SNR (linear) with unit noise variance.
//
// # Safety
// `out` must be a valid pointer. Free the handle with [`iao_link_free`].
enum IaoStatus iao_link_from_stream_snr(double rho,
                                        uintptr_t streams,
                                        double gamma,
                                        struct IaoLink **out);

// # Safety
// `link` must come from an `iao_link_*` constructor and not be freed twice.
void iao_link_free(struct IaoLink *link);

// Average sum rate with perfect CSI at per-stream SNR `rho`.
//
// # Safety
// `net` and `out` must be valid pointers.
enum IaoStatus iao_avg_sum_rate(const struct IaoNetwork *net, double rho, double *out);

// CSI error variance for a given symbol allocation.
//
// # Safety
// `net`, `link` and `out` must be valid pointers.
enum IaoStatus iao_error_variance(const struct IaoNetwork *net,
                                  const struct IaoLink *link,
                                  uintptr_t forward_training,
                                  uintptr_t feedback_training,
                                  uintptr_t feedback,
                                  double *out);

// Splits `overhead_symbols` between the three acquisition phases.
//
// # Safety
// `net`, `link` and `out` must be valid pointers.
enum IaoStatus iao_optimal_split(const struct IaoNetwork *net,
                                 const struct IaoLink *link,
                                 double overhead_symbols,
                                 struct IaoSplit *out);

// Effective rate at overhead fraction `alpha` for normalized Doppler
// `doppler`.
//
// # Safety
// `net`, `link` and `out` must be valid pointers.
enum IaoStatus iao_effective_rate(const struct IaoNetwork *net,
                                  const struct IaoLink *link,
                                  double doppler,
                                  double alpha,
                                  double *out);

// Closed-form small-Doppler overhead optimum.
//
// # Safety
// `net`, `link` and `out` must be valid pointers.
enum IaoStatus iao_alpha_star_expansion(const struct IaoNetwork *net,
                                        const struct IaoLink *link,
                                        double doppler,
                                        struct IaoDesign *out);

// Numerically maximized overhead fraction.
//
// # Safety
// `net`, `link` and `out` must be valid pointers.
enum IaoStatus iao_alpha_star_numeric(const struct IaoNetwork *net,
                                      const struct IaoLink *link,
                                      double doppler,
                                      struct IaoDesign *out);

// Whether a `users`-user cluster may grow by one at this Doppler.
//
// # Safety
// `out` must be a valid pointer.
enum IaoStatus iao_admission_rule(uintptr_t users, double doppler, bool *out);

// Cluster size chosen by the admission rule, capped at `max_users`.
//
// # Safety
// `out` must be a valid pointer.
enum IaoStatus iao_cluster_size_rule(double doppler, uintptr_t max_users, uintptr_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IA_OVERHEAD_H */
