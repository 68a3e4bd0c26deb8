/* C interface for the varifrac fracture-energy library. */

#ifndef VARIFRAC_H
#define VARIFRAC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes mirroring the CLI exit codes.
 */
typedef enum VfStatus {
  VfStatus_Ok = 0,
  VfStatus_IoError = 1,
  VfStatus_ValidationError = 2,
  VfStatus_DensityCheckFailed = 3,
  VfStatus_NoFeasibleCandidate = 4,
  VfStatus_NullArgument = 5,
} VfStatus;

/**
 * Opaque tetrahedral body mesh.
 */
typedef struct VfMesh VfMesh;

/**
 * Opaque crack surface with multiplicities.
 */
typedef struct VfSurface VfSurface;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread. Never null;
 * empty before any failure. Do not free.
 */
const char *vf_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a pointer previously returned by this library
 * through a string out-parameter.
 */
void vf_string_free(char *s);

/**
 * Loads a `tetmesh 1` file. Returns null on failure.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
struct VfMesh *vf_mesh_load(const char *path);

/**
 * # Safety
 * `mesh` must be null or a pointer from `vf_mesh_load`, not yet freed.
 */
void vf_mesh_free(struct VfMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live pointer from `vf_mesh_load`.
 */
uintptr_t vf_mesh_num_nodes(const struct VfMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live pointer from `vf_mesh_load`.
 */
uintptr_t vf_mesh_num_tets(const struct VfMesh *mesh);

/**
 * Loads a `trisurf 1` file. Returns null on failure.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
struct VfSurface *vf_surface_load(const char *path);

/**
 * # Safety
 * `surface` must be null or a pointer from `vf_surface_load`.
 */
void vf_surface_free(struct VfSurface *surface);

/**
 * Total weight measure (multiplicity-weighted area).
 *
 * # Safety
 * `surface` must be a live pointer from `vf_surface_load`.
 */
double vf_surface_mass(const struct VfSurface *surface);

/**
 * Total boundary measure.
 *
 * # Safety
 * `surface` must be a live pointer from `vf_surface_load`.
 */
double vf_surface_boundary_mass(const struct VfSurface *surface);

/**
 * Crack energy with default parameters, written to `out_total`.
 *
 * # Safety
 * `surface` must be a live pointer; `out_total` must be writable.
 */
enum VfStatus vf_surface_crack_energy(const struct VfSurface *surface, double *out_total);

/**
 * Runs the full minimization pipeline from a TOML config file and
 * returns the run report as a JSON string through `out_json`.
 *
 * # Safety
 * `config_path` must be a valid NUL-terminated string; `out_json`
 * must be writable. The returned string is freed with
 * `vf_string_free`.
 */
enum VfStatus vf_minimize(const char *config_path, char **out_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* VARIFRAC_H */
