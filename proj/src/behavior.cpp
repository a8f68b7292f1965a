#include "lamarl/behavior.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "lamarl/region.hpp"

namespace lamarl {

using nlohmann::json;

const double kExplorationDelta = 0.05;

void BehaviorSpec::validate(double f_max) const {
  if (kind == SpecKind::Policy) {
    if (!condition_terms.empty()) {
      throw Error("policy spec must not carry condition terms");
    }
    for (const ForceTerm& t : force_terms) {
      if (t.gain < 0.0) throw Error("force term gain must be >= 0");
      if (t.primitive == ForcePrimitive::RepelNeighbors && t.range <= 0.0) {
        throw Error("repel_neighbors requires a positive range");
      }
    }
  } else {
    if (!force_terms.empty()) {
      throw Error("reward spec must not carry force terms");
    }
    for (const ConditionTerm& t : condition_terms) {
      if (t.primitive == ConditionPrimitive::ExplorationDone &&
          t.threshold <= 0.0) {
        throw Error("exploration_done requires a positive threshold");
      }
    }
  }
  (void)f_max;
}

double rho_weight(double dist, double r_sense) {
  if (dist >= r_sense) return 0.0;
  return 0.5 * (1.0 + std::cos(M_PI * dist / r_sense));
}

Vec2 prior_policy(const LocalView& view, const BehaviorSpec& spec,
                  double f_max) {
  if (spec.kind != SpecKind::Policy) {
    throw Error("prior_policy requires a policy spec");
  }

  Vec2 force;
  for (const ForceTerm& term : spec.force_terms) {
    switch (term.primitive) {
      case ForcePrimitive::AttractTarget: {
        force += term.gain * view.target_rel.normalized();
        break;
      }
      case ForcePrimitive::RepelNeighbors: {
        for (const NeighborView& nb : view.neighbors) {
          const double d = nb.rel_p.norm();
          if (d >= term.range) continue;
          // Push away from the neighbor, linearly stronger as it closes in.
          const Vec2 away = d > 0.0 ? nb.rel_p * (-1.0 / d) : Vec2{};
          force += term.gain * ((term.range - d) / term.range) * away;
        }
        break;
      }
      case ForcePrimitive::SyncVelocity: {
        if (view.neighbors.empty()) break;
        Vec2 mean_rel_v;
        for (const NeighborView& nb : view.neighbors) mean_rel_v += nb.rel_v;
        // mean(v_j) - v_i equals the mean of the relative velocities.
        force += term.gain * (mean_rel_v / static_cast<double>(view.neighbors.size()));
        break;
      }
    }
  }
  return clamp_box(force, -f_max, f_max);
}

namespace {

bool exploration_done(const LocalView& view, double delta) {
  if (view.cell_rels.empty()) return true;
  Vec2 weighted_sum;
  double weight_total = 0.0;
  for (const Vec2& rel : view.cell_rels) {
    const double w = rho_weight(rel.norm(), view.r_sense);
    weighted_sum += w * rel;
    weight_total += w;
  }
  if (weight_total <= 0.0) return true;
  return (weighted_sum / weight_total).norm() <= delta;
}

bool condition_holds(const ConditionTerm& term, const LocalView& view) {
  switch (term.primitive) {
    case ConditionPrimitive::InsideRegion:
      return view.inside_region;
    case ConditionPrimitive::CollisionFree:
      return view.min_neighbor_dist >= 2.0 * view.r_avoid;
    case ConditionPrimitive::ExplorationDone:
      return exploration_done(
          view, term.threshold > 0.0 ? term.threshold : kExplorationDelta);
  }
  return false;
}

}  // namespace

double llm_reward(const LocalView& view, const BehaviorSpec& spec) {
  if (spec.kind != SpecKind::Reward) {
    throw Error("llm_reward requires a reward spec");
  }
  for (const ConditionTerm& term : spec.condition_terms) {
    if (!condition_holds(term, view)) return 0.0;
  }
  return 1.0;
}

double mdr_reward(const LocalView& view, double delta) {
  if (view.r_sense <= 0.0) throw Error("mdr_reward requires r_sense > 0");
  if (!view.inside_region) return 0.0;
  if (view.min_neighbor_dist < 2.0 * view.r_avoid) return 0.0;
  return exploration_done(view, delta) ? 1.0 : 0.0;
}

SpecResult eval_spec(const BehaviorSpec& spec, const LocalView& view,
                     double f_max) {
  spec.validate(f_max);
  SpecResult result;
  if (spec.kind == SpecKind::Policy) {
    result.action = prior_policy(view, spec, f_max);
  } else {
    result.reward = llm_reward(view, spec);
  }
  return result;
}

std::string to_string(ForcePrimitive p) {
  switch (p) {
    case ForcePrimitive::AttractTarget: return "attract_target";
    case ForcePrimitive::RepelNeighbors: return "repel_neighbors";
    case ForcePrimitive::SyncVelocity: return "sync_velocity";
  }
  return "?";
}

std::string to_string(ConditionPrimitive p) {
  switch (p) {
    case ConditionPrimitive::InsideRegion: return "inside_region";
    case ConditionPrimitive::CollisionFree: return "collision_free";
    case ConditionPrimitive::ExplorationDone: return "exploration_done";
  }
  return "?";
}

namespace {

ForcePrimitive force_primitive_from(const std::string& name) {
  if (name == "attract_target") return ForcePrimitive::AttractTarget;
  if (name == "repel_neighbors") return ForcePrimitive::RepelNeighbors;
  if (name == "sync_velocity") return ForcePrimitive::SyncVelocity;
  throw Error("unknown force primitive '" + name +
              "'; allowed: attract_target, repel_neighbors, sync_velocity");
}

ConditionPrimitive condition_primitive_from(const std::string& name) {
  if (name == "inside_region") return ConditionPrimitive::InsideRegion;
  if (name == "collision_free") return ConditionPrimitive::CollisionFree;
  if (name == "exploration_done") return ConditionPrimitive::ExplorationDone;
  throw Error("unknown condition primitive '" + name +
              "'; allowed: inside_region, collision_free, exploration_done");
}

}  // namespace

std::string spec_to_json(const BehaviorSpec& spec) {
  json j;
  j["kind"] = spec.kind == SpecKind::Policy ? "policy" : "reward";
  j["combine"] = spec.kind == SpecKind::Policy ? "sum" : "all-of";
  json terms = json::array();
  if (spec.kind == SpecKind::Policy) {
    for (const ForceTerm& t : spec.force_terms) {
      json jt;
      jt["primitive"] = to_string(t.primitive);
      jt["gain"] = t.gain;
      jt["range"] = t.range;
      terms.push_back(jt);
    }
  } else {
    for (const ConditionTerm& t : spec.condition_terms) {
      json jt;
      jt["primitive"] = to_string(t.primitive);
      jt["threshold"] = t.threshold;
      terms.push_back(jt);
    }
  }
  j["terms"] = terms;
  return j.dump(2);
}

BehaviorSpec spec_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& ex) {
    throw Error(std::string("behavior spec is not valid JSON: ") + ex.what());
  }
  BehaviorSpec spec;
  const std::string kind = j.value("kind", "");
  if (kind == "policy") {
    spec.kind = SpecKind::Policy;
  } else if (kind == "reward") {
    spec.kind = SpecKind::Reward;
  } else {
    throw Error("behavior spec kind must be 'policy' or 'reward'");
  }
  if (!j.contains("terms") || !j["terms"].is_array()) {
    throw Error("behavior spec is missing its terms array");
  }
  for (const json& jt : j["terms"]) {
    const std::string name = jt.value("primitive", "");
    if (spec.kind == SpecKind::Policy) {
      ForceTerm t;
      t.primitive = force_primitive_from(name);
      t.gain = jt.value("gain", 1.0);
      t.range = jt.value("range", 0.0);
      spec.force_terms.push_back(t);
    } else {
      ConditionTerm t;
      t.primitive = condition_primitive_from(name);
      t.threshold = jt.value("threshold", 0.0);
      spec.condition_terms.push_back(t);
    }
  }
  spec.validate();
  return spec;
}

BehaviorSpec reference_policy_spec(double r_avoid) {
  BehaviorSpec spec;
  spec.kind = SpecKind::Policy;
  spec.force_terms = {
      {ForcePrimitive::AttractTarget, 1.0, 0.0},
      {ForcePrimitive::RepelNeighbors, 1.0, 2.5 * r_avoid},
      {ForcePrimitive::SyncVelocity, 0.3, 0.0},
  };
  return spec;
}

BehaviorSpec reference_reward_spec() {
  BehaviorSpec spec;
  spec.kind = SpecKind::Reward;
  spec.condition_terms = {
      {ConditionPrimitive::InsideRegion, 0.0},
      {ConditionPrimitive::CollisionFree, 0.0},
      {ConditionPrimitive::ExplorationDone, kExplorationDelta},
  };
  return spec;
}

}  // namespace lamarl
