#ifndef IMAC_H
#define IMAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ImacStatus {
  IMAC_STATUS_OK = 0,
  IMAC_STATUS_NULL_POINTER = 1,
  IMAC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed weight file; the message carries the byte offset.
   */
  IMAC_STATUS_FORMAT = 3,
  IMAC_STATUS_IO = 4,
  /**
   * Solver divergence or another numerical failure.
   */
  IMAC_STATUS_NUMERICAL = 5,
  IMAC_STATUS_PANIC = 6,
} ImacStatus;

typedef enum ImacBitcell {
  IMAC_BITCELL_ZERO_T1R = 0,
  IMAC_BITCELL_ONE_T1R = 1,
} ImacBitcell;

/**
 * Subarray geometry and technology.
 */
typedef struct ImacFabric ImacFabric;

/**
 * A binarized network.
 */
typedef struct ImacModel ImacModel;

/**
 * A model mapped onto a fabric.
 */
typedef struct ImacNetwork ImacNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a
 * success. Valid until the next call into the library on this thread.
 */
const char *imac_last_error(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ImacStatus imac_model_load(const char *path, struct ImacModel **out);

/**
 * Parses an in-memory weight file.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum ImacStatus imac_model_from_bytes(const uint8_t *data, size_t len, struct ImacModel **out);

/**
 * Input width of the first layer, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t imac_model_input_len(const struct ImacModel *model);

/**
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t imac_model_class_count(const struct ImacModel *model);

/**
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void imac_model_free(struct ImacModel *model);

/**
 * Fabric of `rows x cols` subarrays using a builtin technology
 * (`"MRAM"`, `"CBRAM"` or `"PCM"`, case-insensitive).
 *
 * # Safety
 * `technology` must be a NUL-terminated string; `out` must be writable.
 */
enum ImacStatus imac_fabric_new(size_t rows,
                                size_t cols,
                                const char *technology,
                                enum ImacBitcell bitcell,
                                bool parasitics,
                                struct ImacFabric **out);

/**
 * Sets the neuron noise sigma in volts; 0 disables noise.
 *
 * # Safety
 * `fabric` must be a live handle not shared with another thread.
 */
enum ImacStatus imac_fabric_set_noise(struct ImacFabric *fabric, double sigma);

/**
 * # Safety
 * `fabric` must be NULL or a handle not yet freed.
 */
void imac_fabric_free(struct ImacFabric *fabric);

/**
 * Mean differential signal (V) and SNR of one all-+1 subarray at full
 * input. A noiseless fabric reports an infinite SNR.
 *
 * # Safety
 * `fabric` must be a live handle; outputs must be writable.
 */
enum ImacStatus imac_measure_snr(const struct ImacFabric *fabric, double *signal, double *snr);

/**
 * Partitions and programs `model` onto `fabric`. Both may be freed after
 * the call.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum ImacStatus imac_deploy(const struct ImacModel *model,
                            const struct ImacFabric *fabric,
                            struct ImacNetwork **out);

/**
 * Tiles in the deployed network, or 0 for a NULL handle.
 *
 * # Safety
 * `net` must be NULL or a live handle.
 */
size_t imac_network_tile_count(const struct ImacNetwork *net);

/**
 * # Safety
 * `net` must be NULL or a handle not yet freed.
 */
void imac_network_free(struct ImacNetwork *net);

/**
 * Classifies one image of `len` pixels in [0, 1]. `out_power`, when not NULL,
 * receives the total modeled power in watts.
 *
 * # Safety
 * `net` must be a live handle, `pixels` must point to `len` floats and
 * `out_class` must be writable.
 */
enum ImacStatus imac_forward(const struct ImacNetwork *net,
                             const float *pixels,
                             size_t len,
                             uint64_t seed,
                             size_t *out_class,
                             double *out_power);

/**
 * Integer reference classifier on `len` input bits (0 or 1).
 *
 * # Safety
 * `model` must be a live handle, `bits` must point to `len` bytes and
 * `out_class` must be writable.
 */
enum ImacStatus imac_forward_digital(const struct ImacModel *model,
                                     const uint8_t *bits,
                                     size_t len,
                                     size_t *out_class);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMAC_H */
