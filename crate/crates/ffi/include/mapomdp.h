#ifndef MAPOMDP_H
#define MAPOMDP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a call.
typedef enum MapStatus {
  MAP_STATUS_OK = 0,
  // A required pointer was null.
  MAP_STATUS_NULL_POINTER = 1,
  // An argument was out of range or a string was not UTF-8.
  MAP_STATUS_INVALID_ARGUMENT = 2,
  // The model text or JSON could not be parsed or failed validation.
  MAP_STATUS_INVALID_MODEL = 3,
  // A state cap or expansion budget was exceeded.
  MAP_STATUS_LIMIT_EXCEEDED = 4,
  // Reading a file failed.
  MAP_STATUS_IO = 5,
  // Numerical failure while planning.
  MAP_STATUS_PLAN_FAILED = 6,
  // A Rust panic was caught at the boundary.
  MAP_STATUS_PANIC = 7,
} MapStatus;

// A policy on the belief-simplex grid.
typedef struct MapBaseline MapBaseline;

// A loaded POMDP.
typedef struct MapModel MapModel;

// A policy on the coefficient grid.
typedef struct MapPlanner MapPlanner;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next call into this library from the same thread.
const char *map_last_error(void);

// Library version as a static nul-terminated string.
const char *map_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or come from this library and not be freed twice.
void map_string_free(char *s);

// Loads a model from a `.POMDP` file, or a JSON model when the path ends
// in `.json`.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum MapStatus map_model_load(const char *path, struct MapModel **out);

// Parses a model from `.POMDP` text.
//
// # Safety
// `text` must be a nul-terminated string; `out` must be writable.
enum MapStatus map_model_parse(const char *text, struct MapModel **out);

// Parses a model from its JSON form.
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum MapStatus map_model_from_json(const char *json, struct MapModel **out);

// Serializes a model to JSON; free the result with [`map_string_free`].
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum MapStatus map_model_to_json(const struct MapModel *model, char **out);

// Number of states, actions and observations, and the discount factor.
// Any of the out pointers may be null.
//
// # Safety
// `model` must be a live handle.
enum MapStatus map_model_shape(const struct MapModel *model,
                               size_t *states,
                               size_t *actions,
                               size_t *observations,
                               double *discount);

// Releases a model. Planners built from it stay valid.
//
// # Safety
// `model` must be null or a handle not yet freed.
void map_model_free(struct MapModel *model);

// Builds and solves the coefficient-grid MDP at mesh `epsilon`.
// `state_cap` of zero keeps the default cap; `full_grid` enumerates the
// whole lattice instead of the reachable part.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum MapStatus map_plan(const struct MapModel *model,
                        double epsilon,
                        double vi_tol,
                        size_t state_cap,
                        bool full_grid,
                        struct MapPlanner **out);

// Rank of the basis, number of grid states and value at the start belief.
// Any of the out pointers may be null.
//
// # Safety
// `planner` must be a live handle.
enum MapStatus map_planner_summary(const struct MapPlanner *planner,
                                   size_t *rank,
                                   size_t *grid_size,
                                   double *initial_value);

// Action for the belief `probs[0..len]`.
//
// # Safety
// `planner` must be a live handle, `probs` must point to `len` doubles and
// `action` must be writable.
enum MapStatus map_planner_act(const struct MapPlanner *planner,
                               const double *probs,
                               size_t len,
                               size_t *action);

// Policy table as JSON; free the result with [`map_string_free`].
//
// # Safety
// `planner` must be a live handle; `out` must be writable.
enum MapStatus map_planner_policy_json(const struct MapPlanner *planner, char **out);

// # Safety
// `planner` must be null or a handle not yet freed.
void map_planner_free(struct MapPlanner *planner);

// Builds and solves the simplex-grid MDP; `1/delta` must be an integer.
// `state_cap` of zero means no cap.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum MapStatus map_baseline_plan(const struct MapModel *model,
                                 double delta,
                                 double vi_tol,
                                 size_t state_cap,
                                 struct MapBaseline **out);

// Number of lattice points and value at the start belief; either out
// pointer may be null.
//
// # Safety
// `baseline` must be a live handle.
enum MapStatus map_baseline_summary(const struct MapBaseline *baseline,
                                    size_t *grid_size,
                                    double *initial_value);

// Action for the belief `probs[0..len]`.
//
// # Safety
// As [`map_planner_act`].
enum MapStatus map_baseline_act(const struct MapBaseline *baseline,
                                const double *probs,
                                size_t len,
                                size_t *action);

// Policy table as JSON; free the result with [`map_string_free`].
//
// # Safety
// `baseline` must be a live handle; `out` must be writable.
enum MapStatus map_baseline_policy_json(const struct MapBaseline *baseline, char **out);

// # Safety
// `baseline` must be null or a handle not yet freed.
void map_baseline_free(struct MapBaseline *baseline);

// Optimal finite-horizon value at `probs[0..len]` with horizon chosen so
// the truncation error is at most `slack`. `budget` of zero keeps the
// default expansion budget.
//
// # Safety
// `model` must be a live handle, `probs` must point to `len` doubles and
// `value` must be writable; `action` may be null.
enum MapStatus map_oracle_value(const struct MapModel *model,
                                const double *probs,
                                size_t len,
                                double slack,
                                uint64_t budget,
                                double *value,
                                size_t *action);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAPOMDP_H */
