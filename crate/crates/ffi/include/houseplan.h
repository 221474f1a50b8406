#ifndef HOUSEPLAN_H
#define HOUSEPLAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call.
 */
typedef enum {
  HP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  HP_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  HP_STATUS_INVALID_UTF8 = 2,
  /**
   * A domain, scene or policy output failed to parse.
   */
  HP_STATUS_PARSE = 3,
  /**
   * Parsed fine, but some subtask has no plan.
   */
  HP_STATUS_INFEASIBLE = 4,
  /**
   * An argument was outside its allowed range.
   */
  HP_STATUS_INVALID_ARGUMENT = 5,
  /**
   * Internal failure; the library caught a panic.
   */
  HP_STATUS_INTERNAL = 6,
} HpStatus;

/**
 * Opaque planning domain.
 */
typedef struct HpDomain HpDomain;

/**
 * Opaque scene graph.
 */
typedef struct HpScene HpScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hp_version(void);

/**
 * The built-in household domain.
 */
HpDomain *hp_domain_household(void);

/**
 * Parses a domain from PDDL text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
HpStatus hp_domain_parse(const char *text, HpDomain **out);

/**
 * # Safety
 * `domain` must come from this library and not have been freed. Null is a
 * no-op.
 */
void hp_domain_free(HpDomain *domain);

/**
 * Parses a scene graph from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
HpStatus hp_scene_parse(const char *json, HpScene **out);

/**
 * Number of nodes in the scene, or 0 for null.
 *
 * # Safety
 * `scene` must be null or a live handle from this library.
 */
size_t hp_scene_node_count(const HpScene *scene);

/**
 * # Safety
 * `scene` must come from this library and not have been freed. Null is a
 * no-op.
 */
void hp_scene_free(HpScene *scene);

/**
 * Solves a policy output (trace and subgoal blocks) subtask by subtask
 * with default search settings. On `Ok` or `Infeasible`, `*plan_out`
 * receives the composed plan listing, which for an infeasible run covers
 * the subtasks solved before the failure.
 *
 * # Safety
 * Handles must be live, `output` NUL-terminated, `plan_out` valid.
 */
HpStatus hp_solve(const HpDomain *domain,
                  const HpScene *scene,
                  const char *output,
                  char **plan_out);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void hp_string_free(char *s);

/**
 * Reward for a feasibility flag and a completion label
 * (0 = Bad, 1 = Normal, 2 = Good).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
HpStatus hp_reward(bool feasible, uint32_t label, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOUSEPLAN_H */
