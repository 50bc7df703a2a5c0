#ifndef VOXELLATE_H
#define VOXELLATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VxEngine {
  VX_ENGINE_BRUTE = 0,
  VX_ENGINE_FAST = 1,
} VxEngine;

typedef enum VxKind {
  VX_KIND_VORONOI = 0,
  VX_KIND_JOHNSON_MEHL = 1,
  VX_KIND_LAGUERRE = 2,
} VxKind;

typedef enum VxStatus {
  VX_STATUS_OK = 0,
  VX_STATUS_NULL_POINTER = 1,
  VX_STATUS_INVALID_ARGUMENT = 2,
  VX_STATUS_DIMENSION_MISMATCH = 3,
  VX_STATUS_FORMAT = 4,
  VX_STATUS_IO = 5,
  VX_STATUS_BUFFER_TOO_SMALL = 6,
  VX_STATUS_PANIC = 7,
} VxStatus;

/**
 * Voxel grid over a box domain.
 */
typedef struct VxGrid VxGrid;

/**
 * Generating sites of a tessellation.
 */
typedef struct VxSites VxSites;

/**
 * Completed label and distance images with their counters.
 */
typedef struct VxTessellation VxTessellation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length plus
 * one, so a too-short buffer can be resized and the call repeated.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null with `len == 0`.
 */
size_t vx_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vx_version(void);

/**
 * Creates a grid of `counts[0] x ... x counts[d-1]` voxels. `lengths` may
 * be null for the unit box. `periodic` is a boolean.
 *
 * # Safety
 * `counts` (and `lengths` when non-null) must hold `d` values; `out` must be writable.
 */
enum VxStatus vx_grid_new(size_t d,
                          const size_t *counts,
                          const double *lengths,
                          int periodic,
                          struct VxGrid **out);

/**
 * # Safety
 * `grid` must come from [`vx_grid_new`] and not be used afterwards.
 */
void vx_grid_free(struct VxGrid *grid);

/**
 * Number of voxels, 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
size_t vx_grid_voxel_count(const struct VxGrid *grid);

/**
 * Draws `n` uniform sites in the grid's domain. `kind` is a [`VxKind`];
 * `growth` and `horizon` are ignored for Voronoi.
 *
 * # Safety
 * `grid` must be a live handle; `out` must be writable.
 */
enum VxStatus vx_sites_generate(const struct VxGrid *grid,
                                uint32_t kind,
                                size_t n,
                                double growth,
                                double horizon,
                                uint64_t seed,
                                struct VxSites **out);

/**
 * Sites from caller arrays. `kind` is a [`VxKind`]; `positions` holds
 * `n * d` coordinates, site by site. `births` (n values) and `growth` are
 * required for the timed kinds; `births` may be null for Voronoi.
 *
 * # Safety
 * Arrays must hold the stated number of values; `out` must be writable.
 */
enum VxStatus vx_sites_from_arrays(const struct VxGrid *grid,
                                   uint32_t kind,
                                   size_t n,
                                   const double *positions,
                                   const double *births,
                                   double growth,
                                   struct VxSites **out);

/**
 * Number of sites, 0 for a null handle.
 *
 * # Safety
 * `sites` must be null or a live handle.
 */
size_t vx_sites_len(const struct VxSites *sites);

/**
 * # Safety
 * `sites` must come from this library and not be used afterwards.
 */
void vx_sites_free(struct VxSites *sites);

/**
 * Rasterises `sites` on `grid` with a [`VxEngine`]. `param` may be null (model optimum) or
 * point at a fixed `r0` / `t0` for the fast engine. `prune` enables
 * removal of ineffective timed sites.
 *
 * # Safety
 * Handles must be live; `param` null or readable; `out` writable.
 */
enum VxStatus vx_tessellate(const struct VxSites *sites,
                            const struct VxGrid *grid,
                            uint32_t engine,
                            const double *param,
                            int prune,
                            struct VxTessellation **out);

/**
 * # Safety
 * `t` must come from [`vx_tessellate`] and not be used afterwards.
 */
void vx_tessellation_free(struct VxTessellation *t);

/**
 * Copies the `N_v` labels (axis 0 fastest) into `out`, which holds `len`
 * values.
 *
 * # Safety
 * `t` must be live; `out` must hold `len` writable values.
 */
enum VxStatus vx_tessellation_copy_labels(const struct VxTessellation *t,
                                          uint32_t *out,
                                          size_t len);

/**
 * Copies the `N_v` distances (Euclidean for Voronoi, arrival time otherwise).
 *
 * # Safety
 * `t` must be live; `out` must hold `len` writable values.
 */
enum VxStatus vx_tessellation_copy_distances(const struct VxTessellation *t,
                                             double *out,
                                             size_t len);

/**
 * Evaluation counts of step 1 and step 2. Either pointer may be null.
 *
 * # Safety
 * `t` must be live; non-null outputs must be writable.
 */
enum VxStatus vx_tessellation_counters(const struct VxTessellation *t,
                                       uint64_t *step1,
                                       uint64_t *step2);

/**
 * `r0` / `t0` used by the fast engine; NaN for the brute-force engine.
 *
 * # Safety
 * `t` must be live; `out` writable.
 */
enum VxStatus vx_tessellation_param(const struct VxTessellation *t, double *out);

/**
 * Writes the label image (and the distance image when `distances_path`
 * is non-null) with their JSON headers. `seed` is recorded when
 * `has_seed` is non-zero.
 *
 * # Safety
 * `t` must be live; paths must be NUL-terminated strings.
 */
enum VxStatus vx_tessellation_write(const struct VxTessellation *t,
                                    const char *labels_path,
                                    const char *distances_path,
                                    int has_seed,
                                    uint64_t seed);

/**
 * Cost-optimal investigation-ball volume for `n` sites in a domain of
 * volume `volume`.
 *
 * # Safety
 * `out` must be writable.
 */
enum VxStatus vx_optimal_v0(size_t n, double volume, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOXELLATE_H */
