#include <math.h>
#include <stdio.h>
#include <string.h>

#include "mapomdp.h"

#define CHECK(call)                                                   \
  do {                                                                \
    enum MapStatus s_ = (call);                                       \
    if (s_ != MAP_STATUS_OK) {                                        \
      fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_,         \
              map_last_error() ? map_last_error() : "?");             \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(int argc, char **argv) {
  if (argc != 2) {
    fprintf(stderr, "usage: smoke MODEL\n");
    return 2;
  }
  MapModel *model = NULL;
  CHECK(map_model_load(argv[1], &model));
  size_t states = 0, actions = 0;
  double discount = 0.0;
  CHECK(map_model_shape(model, &states, &actions, NULL, &discount));

  MapPlanner *planner = NULL;
  CHECK(map_plan(model, 0.1, 1e-4, 0, false, &planner));
  size_t rank = 0, grid = 0;
  double value = 0.0;
  CHECK(map_planner_summary(planner, &rank, &grid, &value));

  double uniform[2] = {0.5, 0.5};
  size_t action = 99;
  CHECK(map_planner_act(planner, uniform, 2, &action));

  char *policy = NULL;
  CHECK(map_planner_policy_json(planner, &policy));
  int has_states = strstr(policy, "\"states\"") != NULL;
  map_string_free(policy);

  enum MapStatus bad = map_baseline_plan(model, 0.3, 1e-4, 0, NULL);
  if (bad != MAP_STATUS_NULL_POINTER && bad != MAP_STATUS_INVALID_ARGUMENT) return 1;

  printf("states=%zu actions=%zu rank=%zu grid=%zu action=%zu json=%d\n", states, actions,
         rank, grid, action, has_states);
  map_planner_free(planner);
  map_model_free(model);
  return isfinite(value) ? 0 : 1;
}
