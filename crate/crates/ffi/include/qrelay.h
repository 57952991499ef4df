#ifndef QRELAY_H
#define QRELAY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QrStatus {
  QR_STATUS_OK = 0,
  QR_STATUS_INVALID_INPUT = 1,
  QR_STATUS_VERIFICATION_FAILED = 2,
  QR_STATUS_RESOURCE_LIMIT = 3,
  QR_STATUS_NULL_POINTER = 4,
  QR_STATUS_PANIC = 5,
} QrStatus;

typedef enum QrChannelKind {
  QR_CHANNEL_KIND_CQ = 0,
  QR_CHANNEL_KIND_BROADCAST = 1,
  QR_CHANNEL_KIND_MAC = 2,
} QrChannelKind;

typedef enum QrMacVariant {
  QR_MAC_VARIANT_CONDITIONAL = 0,
  QR_MAC_VARIANT_AS_WRITTEN = 1,
} QrMacVariant;

typedef enum QrLemma {
  QR_LEMMA_MEASUREMENT_ON_CLOSE_STATES = 0,
  QR_LEMMA_TENDER_OPERATOR = 1,
  /**
   * Single-weight form `(id − S) + 4T`; reported, not a theorem.
   */
  QR_LEMMA_HAYASHI_NAGAOKA = 2,
  /**
   * `2(id − S) + 4T`.
   */
  QR_LEMMA_HAYASHI_NAGAOKA_STANDARD = 3,
} QrLemma;

/**
 * Opaque cq, broadcast or MAC channel.
 */
typedef struct QrChannel QrChannel;

/**
 * Opaque convex rate region.
 */
typedef struct QrRegion QrRegion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread; do not free.
 */
const char *qr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qr_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void qr_string_free(char *s);

/**
 * Parses a channel file (JSON text).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum QrStatus qr_channel_from_json(const char *json, struct QrChannel **out);

/**
 * A canonical cq family: `orthogonal[:k]`, `overlap-pair`,
 * `depolarized[:p]`, `constant[:k]`; or `adder-mac`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum QrStatus qr_channel_family(const char *spec, struct QrChannel **out);

/**
 * Broadcast channel `x ↦ W1(x) ⊗ W2(x)` from two cq channels.
 *
 * # Safety
 * `w1`, `w2` must be live handles; `out` must be writable.
 */
enum QrStatus qr_broadcast_product(const struct QrChannel *w1,
                                   const struct QrChannel *w2,
                                   struct QrChannel **out);

/**
 * # Safety
 * `ch` must be NULL or a handle from this library not yet freed.
 */
void qr_channel_free(struct QrChannel *ch);

/**
 * # Safety
 * `ch` must be a live handle; `out` must be writable.
 */
enum QrStatus qr_channel_kind(const struct QrChannel *ch, enum QrChannelKind *out);

/**
 * Serializes a channel to its JSON file form.
 *
 * # Safety
 * `ch` must be a live handle; `out` must be writable. Free the result with
 * [`qr_string_free`].
 */
enum QrStatus qr_channel_to_json(const struct QrChannel *ch, char **out);

/**
 * `χ(P; V)` in bits for a cq channel. `weights` may be NULL for the uniform
 * distribution, otherwise it holds `len` weights aligned with the alphabet.
 *
 * # Safety
 * `ch` must be a live handle; `weights` must be NULL or point to `len`
 * doubles; `chi` must be writable.
 */
enum QrStatus qr_holevo_chi(const struct QrChannel *ch,
                            const double *weights,
                            uintptr_t len,
                            double *chi);

/**
 * MAC-phase region over product inputs on a grid of resolution `k`;
 * `variant` is a [`QrMacVariant`] value.
 *
 * # Safety
 * `mac` must be a live MAC handle; `out` must be writable.
 */
enum QrStatus qr_region_mac(const struct QrChannel *mac,
                            uintptr_t k,
                            int32_t variant,
                            struct QrRegion **out);

/**
 * Broadcast-phase region on a grid of resolution `k`.
 *
 * # Safety
 * `bc` must be a live broadcast handle; `out` must be writable.
 */
enum QrStatus qr_region_broadcast(const struct QrChannel *bc, uintptr_t k, struct QrRegion **out);

/**
 * # Safety
 * `a`, `b` must be live region handles; `out` must be writable.
 */
enum QrStatus qr_region_intersect(const struct QrRegion *a,
                                  const struct QrRegion *b,
                                  struct QrRegion **out);

/**
 * Number of polygon vertices (counter-clockwise, origin included).
 *
 * # Safety
 * `region` must be a live handle; `count` must be writable.
 */
enum QrStatus qr_region_vertex_count(const struct QrRegion *region, uintptr_t *count);

/**
 * Copies vertices as interleaved `(R1, R2)` pairs into `xy`, which must hold
 * `2 * capacity` doubles. Fails with `ResourceLimit` if `capacity` is
 * smaller than the vertex count.
 *
 * # Safety
 * `region` must be a live handle; `xy` must point to `2 * capacity` doubles.
 */
enum QrStatus qr_region_vertices(const struct QrRegion *region, double *xy, uintptr_t capacity);

/**
 * # Safety
 * `region` must be NULL or a handle from this library not yet freed.
 */
void qr_region_free(struct QrRegion *region);

/**
 * Seeded random sweep of one operator inequality (`lemma` is a [`QrLemma`]
 * value). Writes the number of
 * violated instances and the smallest slack; a nonzero failure count is
 * reported through the outputs, not the status.
 *
 * # Safety
 * `failures` and `min_slack` must be writable.
 */
enum QrStatus qr_verify_lemma(int32_t lemma,
                              uintptr_t instances,
                              uint64_t seed,
                              uintptr_t *failures,
                              double *min_slack);

/**
 * Runs the broadcast coding pipeline for a simulation config (JSON) and
 * returns the full report as JSON.
 *
 * # Safety
 * `bc` must be a live broadcast handle, `config_json` a NUL-terminated
 * string, `report_json` writable. Free the result with [`qr_string_free`].
 */
enum QrStatus qr_simulate(const struct QrChannel *bc,
                          const char *config_json,
                          uintptr_t dim_cap,
                          char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QRELAY_H */
