#pragma once

#include <string>
#include <vector>

#include "lamarl/geometry.hpp"

namespace lamarl {

// Everything a per-robot policy or reward function is allowed to read: the
// robot's own state, the relative quantities inside its sensing radius, and
// the derived occupancy summary (inside flag, closest-neighbor distance) the
// reward conditions evaluate. The flat observation is assembled from this.
struct NeighborView {
  Vec2 rel_p;  // p_j - p_i
  Vec2 rel_v;  // v_j - v_i
};

struct LocalView {
  Vec2 position;
  Vec2 velocity;
  bool inside_region = false;
  double min_neighbor_dist = 0.0;  // capped at r_sense when no neighbor is sensed
  std::vector<NeighborView> neighbors;
  Vec2 target_rel;  // p_t - p_i, uncapped
  std::vector<Vec2> cell_rels;  // observed unoccupied cell centers, relative
  double r_sense = 0.0;
  double r_avoid = 0.0;
};

enum class ForcePrimitive { AttractTarget, RepelNeighbors, SyncVelocity };
enum class ConditionPrimitive { InsideRegion, CollisionFree, ExplorationDone };

struct ForceTerm {
  ForcePrimitive primitive = ForcePrimitive::AttractTarget;
  double gain = 1.0;
  double range = 0.0;  // interaction range; only RepelNeighbors reads it
};

struct ConditionTerm {
  ConditionPrimitive primitive = ConditionPrimitive::InsideRegion;
  double threshold = 0.0;  // only ExplorationDone reads it (centroid offset bound)
};

enum class SpecKind { Policy, Reward };

// Declarative form of a generated function: a policy is a clamped vector sum
// of force terms, a reward is a conjunction of condition terms.
struct BehaviorSpec {
  SpecKind kind = SpecKind::Policy;
  std::vector<ForceTerm> force_terms;
  std::vector<ConditionTerm> condition_terms;

  void validate(double f_max = 1.0) const;  // throws Error on bad terms
};

extern const double kExplorationDelta;  // default centroid offset bound

// Cosine falloff weight in [0, 1]: 1 at distance 0, 0 at r_sense.
double rho_weight(double dist, double r_sense);

// Evaluates a policy spec: clamped sum of the named force primitives.
Vec2 prior_policy(const LocalView& view, const BehaviorSpec& spec,
                  double f_max = 1.0);

// Evaluates a reward spec: 1 iff every condition term holds. The occupancy
// summary the conditions need (inside flag, unoccupied cells) travels inside
// the view.
double llm_reward(const LocalView& view, const BehaviorSpec& spec);

// Hand-designed baseline reward: inside the region, collision free, and the
// rho-weighted centroid of observed unoccupied cells within delta of the
// robot (vacuously true with no observed cells).
double mdr_reward(const LocalView& view, double delta = 0.05);

// Routes a spec to the policy or reward evaluator. For policy specs the
// action is returned in `action`; for reward specs the reward in `reward`.
struct SpecResult {
  Vec2 action;
  double reward = 0.0;
};
SpecResult eval_spec(const BehaviorSpec& spec, const LocalView& view,
                     double f_max = 1.0);

// JSON (de)serialization; round-trips bit-exactly.
std::string spec_to_json(const BehaviorSpec& spec);
BehaviorSpec spec_from_json(const std::string& json_text);

std::string to_string(ForcePrimitive p);
std::string to_string(ConditionPrimitive p);

// Reference specs matching the generated functions used throughout the
// experiments (gains calibrated for the desk-scale scene).
BehaviorSpec reference_policy_spec(double r_avoid);
BehaviorSpec reference_reward_spec();

}  // namespace lamarl
