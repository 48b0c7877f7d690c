#ifndef SPINREG_H
#define SPINREG_H

#pragma once

/* Generated by cbindgen from the spinreg-ffi sources. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpinregStatus {
  SPINREG_STATUS_OK = 0,
  SPINREG_STATUS_NULL_POINTER = 1,
  SPINREG_STATUS_INVALID_INPUT = 2,
  SPINREG_STATUS_NO_RESONANCE = 3,
  SPINREG_STATUS_NO_PRECESSION = 4,
  SPINREG_STATUS_NO_FEASIBLE_PLAN = 5,
  SPINREG_STATUS_SAMPLING_STUCK = 6,
  SPINREG_STATUS_TOO_LARGE = 7,
  SPINREG_STATUS_INTERNAL = 8,
} SpinregStatus;

/**
 * Opaque register: an electron qubit and its nuclear spins.
 */
typedef struct SpinregRegister SpinregRegister;

typedef struct SpinregResonance {
  /**
   * Refined unit time, us.
   */
  double tau_star;
  /**
   * Half-width of the admissible window, us.
   */
  double delta;
  double dot_at_star;
} SpinregResonance;

typedef struct SpinregFidelity {
  double f;
  double f_opt;
  double theta_star;
  double nz_sign;
} SpinregFidelity;

typedef struct SpinregPlan {
  /**
   * 0 for CPMG, otherwise the UDD pulse count.
   */
  uint32_t udd_order;
  uint32_t k;
  double tau;
  uint32_t n_iter;
  double gate_time;
  double min_target;
  double max_unwanted;
} SpinregPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *spinreg_last_error_message(void);

/**
 * Creates an empty register for an electron of total spin `total_spin`
 * whose qubit uses the levels `s0` and `s1`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SpinregStatus spinreg_register_new(double total_spin,
                                        double s0,
                                        double s1,
                                        struct SpinregRegister **out);

/**
 * Frees a register. Null is ignored.
 *
 * # Safety
 * `reg` must come from [`spinreg_register_new`] and not be freed twice.
 */
void spinreg_register_free(struct SpinregRegister *reg);

/**
 * Appends a nuclear spin. `species` is "13C", "29Si" or "29Si+"; couplings
 * are in rad/us and the field in tesla.
 *
 * # Safety
 * `reg` must be a live handle and `species` a NUL-terminated string.
 */
enum SpinregStatus spinreg_register_add_spin(struct SpinregRegister *reg,
                                             const char *species,
                                             double a_par,
                                             double a_perp,
                                             double field_tesla);

/**
 * Number of nuclear spins in the register, 0 for a null handle.
 *
 * # Safety
 * `reg` must be null or a live handle.
 */
size_t spinreg_register_len(const struct SpinregRegister *reg);

/**
 * Refined order-`k` resonance of spin `index` under the given sequence.
 *
 * # Safety
 * `reg` must be a live handle and `out` writable.
 */
enum SpinregStatus spinreg_refine_resonance(const struct SpinregRegister *reg,
                                            size_t index,
                                            uint32_t udd_order,
                                            uint32_t k,
                                            struct SpinregResonance *out);

/**
 * One-tangle of every spin after `n_iter` units of length `tau`. `out` must
 * hold `len` values, at least the register size.
 *
 * # Safety
 * `reg` must be a live handle and `out` valid for `len` writes.
 */
enum SpinregStatus spinreg_one_tangles(const struct SpinregRegister *reg,
                                       uint32_t udd_order,
                                       double tau,
                                       uint32_t n_iter,
                                       double *out,
                                       size_t len);

/**
 * Gate fidelity of a plan with the listed spins as targets and the rest as bath.
 *
 * # Safety
 * `reg` must be a live handle, `targets` valid for `n_targets` reads and `out` writable.
 */
enum SpinregStatus spinreg_fidelity(const struct SpinregRegister *reg,
                                    uint32_t udd_order,
                                    double tau,
                                    uint32_t n_iter,
                                    const size_t *targets,
                                    size_t n_targets,
                                    struct SpinregFidelity *out);

/**
 * Best plan over CPMG, UDD3 and UDD4 with default search settings and the
 * given one-tangle threshold. Returns `NoFeasiblePlan` when none qualifies.
 *
 * # Safety
 * `reg` must be a live handle, `targets` valid for `n_targets` reads and `out` writable.
 */
enum SpinregStatus spinreg_search(const struct SpinregRegister *reg,
                                  const size_t *targets,
                                  size_t n_targets,
                                  double eps_threshold,
                                  struct SpinregPlan *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *spinreg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINREG_H */
