#ifndef TEGSIM_H
#define TEGSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum TegsimStatus {
  TEGSIM_STATUS_OK = 0,
  TEGSIM_STATUS_NULL_POINTER = 1,
  TEGSIM_STATUS_INVALID_ARGUMENT = 2,
  TEGSIM_STATUS_INVALID_MATRIX = 3,
  TEGSIM_STATUS_NEGATIVE_BALANCE_RISK = 4,
  TEGSIM_STATUS_DIMENSION_MISMATCH = 5,
  TEGSIM_STATUS_BUFFER_TOO_SMALL = 6,
  TEGSIM_STATUS_PANIC = 7,
} TegsimStatus;

/**
 * Balances of one layer at one round.
 */
typedef struct TegsimLayer TegsimLayer;

/**
 * Column-stochastic transfer matrix.
 */
typedef struct TegsimMatrix TegsimMatrix;

/**
 * Pairwise exchange rates between layers.
 */
typedef struct TegsimRates TegsimRates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if the last call
 * succeeded. The pointer stays valid until the next call on this thread.
 */
const char *tegsim_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tegsim_version(void);

/**
 * Creates a layer with players named `"0"`, `"1"`, ... holding `balances`.
 */
enum TegsimStatus tegsim_layer_new(const double *balances,
                                   size_t n,
                                   struct TegsimLayer **out_layer);

void tegsim_layer_free(struct TegsimLayer *layer);

/**
 * Number of players in `layer`, or 0 for a null handle.
 */
size_t tegsim_layer_len(const struct TegsimLayer *layer);

enum TegsimStatus tegsim_layer_round(const struct TegsimLayer *layer, uint64_t *out_round);

enum TegsimStatus tegsim_layer_supply(const struct TegsimLayer *layer, double *out_supply);

/**
 * Copies the balances into `buf`, which must hold `tegsim_layer_len` values.
 */
enum TegsimStatus tegsim_layer_balances(const struct TegsimLayer *layer,
                                        double *buf,
                                        size_t capacity);

/**
 * Builds an `n`-by-`n` matrix from `nnz` entries `(rows[k], cols[k], weights[k])`,
 * where `cols` is the sender and `rows` the receiver. Columns must sum to one.
 */
enum TegsimStatus tegsim_matrix_new(size_t n,
                                    const size_t *rows,
                                    const size_t *cols,
                                    const double *weights,
                                    size_t nnz,
                                    struct TegsimMatrix **out_matrix);

void tegsim_matrix_free(struct TegsimMatrix *matrix);

/**
 * One closed round: the new layer conserves the supply of `layer`.
 */
enum TegsimStatus tegsim_step_closed(const struct TegsimLayer *layer,
                                     const struct TegsimMatrix *matrix,
                                     struct TegsimLayer **out_layer);

/**
 * One open round with per-player mint (positive) or burn (negative) `delta`.
 */
enum TegsimStatus tegsim_step_open(const struct TegsimLayer *layer,
                                   const struct TegsimMatrix *matrix,
                                   const double *delta,
                                   size_t n,
                                   struct TegsimLayer **out_layer);

/**
 * Shannon entropy in bits of the balance distribution `values / sum(values)`.
 */
enum TegsimStatus tegsim_entropy(const double *values, size_t n, double *out_bits);

/**
 * Relative entropy `D(p || q)` in bits after normalizing both inputs.
 * Infinite when `q` is zero where `p` is not.
 */
enum TegsimStatus tegsim_relative_entropy(const double *p,
                                          const double *q,
                                          size_t n,
                                          double *out_bits);

/**
 * Mean self-retention of `matrix` and its complement, the circulating share.
 */
enum TegsimStatus tegsim_zeta(const struct TegsimMatrix *matrix,
                              double *out_zeta,
                              double *out_zeta_star);

/**
 * Builds rates between `n` layers named `"0"`, `"1"`, ... from a row-major
 * `n * n` array. Entry `(i, j)` is units of layer `j` per unit of layer `i`;
 * 0 or infinity means no rate. The diagonal must be 1.
 */
enum TegsimStatus tegsim_rates_new(size_t n, const double *dense, struct TegsimRates **out_rates);

void tegsim_rates_free(struct TegsimRates *rates);

/**
 * Searches for a directed cycle whose rate product exceeds `1 + tol`.
 * On success `*out_found` tells whether one exists; if so the layer indices
 * are written to `cycle` (up to `capacity`), the length to `*out_len` and
 * the product to `*out_gain`. A too-small buffer yields `BufferTooSmall`
 * with `*out_len` set to the required length.
 */
enum TegsimStatus tegsim_find_arbitrage(const struct TegsimRates *rates,
                                        double tol,
                                        size_t *cycle,
                                        size_t capacity,
                                        size_t *out_len,
                                        double *out_gain,
                                        bool *out_found);

/**
 * Treasury and recipient balances of the two-account income scheme after
 * `round` rounds, starting from `(omega, 0)`.
 */
enum TegsimStatus tegsim_ubi_closed_form(uint64_t round,
                                         double omega,
                                         double delta,
                                         double epsilon,
                                         double *out_treasury,
                                         double *out_recipient);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEGSIM_H */
