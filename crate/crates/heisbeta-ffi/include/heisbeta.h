#ifndef HEISBETA_H
#define HEISBETA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HbStatus {
  HB_STATUS_OK = 0,
  HB_STATUS_NULL_POINTER = 1,
  HB_STATUS_CONFIG = 2,
  HB_STATUS_DOMAIN = 3,
  HB_STATUS_CERTIFICATION = 4,
  HB_STATUS_PARAMETER = 5,
  HB_STATUS_INTERNAL = 6,
  HB_STATUS_PANIC = 7,
} HbStatus;

/**
 * Opaque characteristic curve.
 */
typedef struct HbCurve HbCurve;

/**
 * Opaque intrinsic graph.
 */
typedef struct HbGraph HbGraph;

/**
 * Last error message on this thread, or NULL. Free with [`hb_string_free`].
 */
char *hb_last_error(void);

/**
 * # Safety
 * `s` must come from this library, or be NULL.
 */
void hb_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hb_version(void);

/**
 * Vertical plane `y = a x + b`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HbStatus hb_graph_affine(double a, double b, struct HbGraph **out);

/**
 * Builds the graph described by a full config text (top-level `seed` plus `[graph]`).
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HbStatus hb_graph_from_config(const char *config, struct HbGraph **out);

/**
 * # Safety
 * `g` must come from this library, or be NULL.
 */
void hb_graph_free(struct HbGraph *g);

/**
 * `ψ(x, z)`.
 *
 * # Safety
 * `g` and `out` must be valid pointers.
 */
enum HbStatus hb_graph_psi(const struct HbGraph *g, double x, double z, double *out);

/**
 * `γ_p(v, r)` on an `nx × nz` grid over `V(Ψ(v), r)`.
 *
 * # Safety
 * `g` and `out` must be valid pointers.
 */
enum HbStatus hb_gamma_p(const struct HbGraph *g,
                         double x,
                         double z,
                         double r,
                         double p,
                         size_t nx,
                         size_t nz,
                         double *out);

/**
 * `β_p(Ψ(x, z), r)` with surface measure on an `nx × nz` grid.
 *
 * # Safety
 * `g` and `out` must be valid pointers.
 */
enum HbStatus hb_beta_p(const struct HbGraph *g,
                        double x,
                        double z,
                        double r,
                        double p,
                        size_t nx,
                        size_t nz,
                        double *out);

/**
 * Characteristic curve through `(x0, z0)` on `[t_min, t_max]`.
 *
 * # Safety
 * `g` and `out` must be valid pointers.
 */
enum HbStatus hb_trace(const struct HbGraph *g,
                       double x0,
                       double z0,
                       double t_min,
                       double t_max,
                       double step,
                       struct HbCurve **out);

/**
 * # Safety
 * `c` must come from this library, or be NULL.
 */
void hb_curve_free(struct HbCurve *c);

/**
 * Number of nodes; 0 for NULL.
 *
 * # Safety
 * `c` must be a valid pointer or NULL.
 */
size_t hb_curve_len(const struct HbCurve *c);

/**
 * Interpolated `g(t)`, clamped to the traced range.
 *
 * # Safety
 * `c` and `out` must be valid pointers.
 */
enum HbStatus hb_curve_eval(const struct HbCurve *c, double t, double *out);

/**
 * Normalized Carleson total for the `[graph]`, `[root]` and `[carleson]` tables of a config text.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HbStatus hb_carleson_total(const char *config, double *out);

#endif  /* HEISBETA_H */
