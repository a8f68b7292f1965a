#include "lamarl/llmgen.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lamarl {

using nlohmann::json;

PromptBundle reference_bundle() {
  PromptBundle b;
  b.task_description =
      "A team of homogeneous disk robots must assemble into a user-provided "
      "target shape. The shape is discretized into grid cells; a cell counts "
      "as occupied when a robot is within the avoidance radius of its center. "
      "Robots sense only neighbors and cells within their sensing radius, "
      "there is no goal assignment, and the swarm must fill the shape evenly "
      "while avoiding collisions. Produce a prior policy function (what force "
      "each robot should apply) and a reward function (when a robot's step is "
      "considered successful) for training.";
  b.cot_questions = {
      "What constraints must a robot satisfy to complete the task?",
      "Which of these constraints are basic and which are complex?",
      "Based on the basic constraints, what basic skills should a robot have?",
      "Which constraints are the key sub-goals that decide task completion?",
  };
  b.api_signatures = {
      {"get_position", "", "vec2", "robot position in the world frame"},
      {"get_velocity", "", "vec2", "robot velocity in the world frame"},
      {"get_neighbor_states", "", "list[(vec2, vec2)]",
       "relative position and velocity of each sensed neighbor, nearest first"},
      {"get_target_cell_offset", "", "vec2",
       "relative position of the nearest unoccupied cell"},
      {"get_unoccupied_cell_offsets", "", "list[vec2]",
       "relative positions of observed unoccupied cells"},
      {"is_inside_region", "", "bool", "whether the robot is inside the shape"},
      {"min_neighbor_distance", "", "float",
       "distance to the closest neighbor, capped at the sensing radius"},
      {"get_sensing_radius", "", "float", "sensing radius r_sense"},
      {"get_avoid_radius", "", "float", "avoidance radius r_avoid"},
  };
  return b;
}

std::string assemble_prompt(const PromptBundle& bundle) {
  if (bundle.task_description.empty()) {
    throw Error("prompt bundle has an empty task description");
  }
  std::ostringstream out;
  out << "## Task\n\n" << bundle.task_description << "\n";
  if (bundle.include_cot && !bundle.cot_questions.empty()) {
    out << "\n## Guiding questions\n\n";
    for (std::size_t i = 0; i < bundle.cot_questions.size(); ++i) {
      out << (i + 1) << ". " << bundle.cot_questions[i] << "\n";
    }
  }
  if (bundle.include_apis && !bundle.api_signatures.empty()) {
    out << "\n## Available APIs\n\n";
    for (const ApiSignature& api : bundle.api_signatures) {
      out << "- " << api.name << "(" << api.params << ") -> " << api.returns
          << ": " << api.doc << "\n";
    }
  }
  return out.str();
}

void ConstraintAnalysis::validate() const {
  if (constraints.empty()) throw Error("constraint analysis lists no constraints");
  if (key_subgoals.empty()) throw Error("constraint analysis lists no key sub-goals");
  const std::set<std::string> all(constraints.begin(), constraints.end());
  std::set<std::string> cover;
  for (const std::string& c : basic) {
    if (!all.count(c)) throw Error("basic constraint not in constraint list: " + c);
    cover.insert(c);
  }
  for (const std::string& c : complex_) {
    if (!all.count(c)) throw Error("complex constraint not in constraint list: " + c);
    if (!cover.insert(c).second) {
      throw Error("constraint is both basic and complex: " + c);
    }
  }
  if (cover.size() != all.size()) {
    throw Error("basic and complex constraints do not cover the constraint list");
  }
}

namespace {

std::vector<std::string> string_list(const json& j, const char* key,
                                     const std::string& raw) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw LlmParseError(std::string("analysis JSON is missing list '") + key + "'",
                        raw);
  }
  std::vector<std::string> out;
  for (const json& v : j[key]) {
    if (!v.is_string()) {
      throw LlmParseError(std::string("entry of '") + key + "' is not a string",
                          raw);
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

constexpr const char* kAnalysisTag = "constraint_analysis";
constexpr const char* kPolicyTag = "policy_function";
constexpr const char* kRewardTag = "reward_function";

std::string normalized(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

ConstraintAnalysis run_constraint_analysis(LlmClient& client,
                                           const PromptBundle& bundle,
                                           TranscriptLog* transcript,
                                           double temperature) {
  std::vector<ChatMessage> messages{
      {"system",
       "You design controllers for multi-robot systems. Answer strictly with "
       "one JSON object and no surrounding prose."},
      {"user",
       assemble_prompt(bundle) +
           "\nAnalyze the task and answer with JSON of the form "
           "{\"constraints\":[...],\"basic\":[...],\"complex\":[...],"
           "\"basic_skills\":[...],\"key_subgoals\":[...]} where basic and "
           "complex partition the constraints, basic_skills derive from the "
           "basic constraints, and key_subgoals are the constraints that "
           "decide completion."},
  };
  CompletionParams params;
  params.temperature = temperature;
  params.step_tag = kAnalysisTag;
  const std::string reply = client.complete(messages, params);
  if (transcript) transcript->append(client.model_id(), kAnalysisTag, messages, reply);

  json j;
  try {
    j = json::parse(reply);
  } catch (const json::exception& ex) {
    throw LlmParseError(std::string("analysis response is not JSON: ") + ex.what(),
                        reply);
  }
  ConstraintAnalysis analysis;
  analysis.constraints = string_list(j, "constraints", reply);
  analysis.basic = string_list(j, "basic", reply);
  analysis.complex_ = string_list(j, "complex", reply);
  analysis.basic_skills = string_list(j, "basic_skills", reply);
  analysis.key_subgoals = string_list(j, "key_subgoals", reply);
  try {
    analysis.validate();
  } catch (const Error& e) {
    throw LlmParseError(std::string("analysis is inconsistent: ") + e.what(), reply);
  }
  return analysis;
}

GenerationResult generate_functions(LlmClient& client,
                                    const ConstraintAnalysis& analysis,
                                    const PromptBundle& bundle,
                                    TranscriptLog* transcript,
                                    double temperature) {
  analysis.validate();

  const auto list_text = [](const std::vector<std::string>& items) {
    std::string out;
    for (const std::string& s : items) {
      out += "\n- " + s;
    }
    return out;
  };

  const std::string context =
      assemble_prompt(bundle) + "\nIdentified basic skills:" +
      list_text(analysis.basic_skills) + "\nIdentified key sub-goals:" +
      list_text(analysis.key_subgoals) + "\n";

  GenerationResult result;
  result.model_id = client.model_id();
  CompletionParams params;
  params.temperature = temperature;

  {
    std::vector<ChatMessage> messages{
        {"system",
         "Emit exactly one JSON object describing a robot behavior; no prose."},
        {"user",
         context +
             "\nCreate the prior policy: one force term per basic skill, "
             "combined by vector sum. Reply with JSON "
             "{\"kind\":\"policy\",\"combine\":\"sum\",\"terms\":[{"
             "\"primitive\":...,\"gain\":...,\"range\":...}]} using only the "
             "primitives attract_target, repel_neighbors, sync_velocity."},
    };
    params.step_tag = kPolicyTag;
    const std::string reply = client.complete(messages, params);
    if (transcript) transcript->append(client.model_id(), kPolicyTag, messages, reply);
    result.raw_transcript += reply;
    try {
      result.policy_spec = spec_from_json(reply);
    } catch (const Error& e) {
      throw LlmParseError(std::string("policy generation failed: ") + e.what(),
                          reply);
    }
    if (result.policy_spec.kind != SpecKind::Policy) {
      throw LlmParseError("policy generation returned a non-policy spec", reply);
    }
  }

  {
    std::vector<ChatMessage> messages{
        {"system",
         "Emit exactly one JSON object describing a robot behavior; no prose."},
        {"user",
         context +
             "\nCreate the reward: one condition term per key sub-goal; the "
             "reward is 1 when every condition holds, else 0. Reply with JSON "
             "{\"kind\":\"reward\",\"combine\":\"all-of\",\"terms\":[{"
             "\"primitive\":...,\"threshold\":...}]} using only the primitives "
             "inside_region, collision_free, exploration_done."},
    };
    params.step_tag = kRewardTag;
    const std::string reply = client.complete(messages, params);
    if (transcript) transcript->append(client.model_id(), kRewardTag, messages, reply);
    result.raw_transcript += "\n";
    result.raw_transcript += reply;
    try {
      result.reward_spec = spec_from_json(reply);
    } catch (const Error& e) {
      throw LlmParseError(std::string("reward generation failed: ") + e.what(),
                          reply);
    }
    if (result.reward_spec.kind != SpecKind::Reward) {
      throw LlmParseError("reward generation returned a non-reward spec", reply);
    }
  }
  return result;
}

std::optional<ForcePrimitive> skill_to_primitive(const std::string& skill) {
  const std::string key = normalized(skill);
  if (key == "movement towards the target region") {
    return ForcePrimitive::AttractTarget;
  }
  if (key == "collision avoidance") return ForcePrimitive::RepelNeighbors;
  if (key == "synchronization with neighbors") return ForcePrimitive::SyncVelocity;
  return std::nullopt;
}

std::optional<ConditionPrimitive> subgoal_to_primitive(const std::string& subgoal) {
  const std::string key = normalized(subgoal);
  if (key == "entering the target region") return ConditionPrimitive::InsideRegion;
  if (key == "collision avoidance") return ConditionPrimitive::CollisionFree;
  if (key == "exploration of unoccupied cells") {
    return ConditionPrimitive::ExplorationDone;
  }
  return std::nullopt;
}

ReviewReport review_functions(const GenerationResult& result,
                              const ConstraintAnalysis& analysis) {
  ReviewReport report;

  std::set<ForcePrimitive> forces;
  for (const ForceTerm& t : result.policy_spec.force_terms) {
    forces.insert(t.primitive);
  }
  for (const std::string& skill : analysis.basic_skills) {
    const auto p = skill_to_primitive(skill);
    if (!p || !forces.count(*p)) report.missing_skills.push_back(skill);
  }

  std::set<ConditionPrimitive> conditions;
  for (const ConditionTerm& t : result.reward_spec.condition_terms) {
    conditions.insert(t.primitive);
  }
  for (const std::string& goal : analysis.key_subgoals) {
    const auto p = subgoal_to_primitive(goal);
    if (!p || !conditions.count(*p)) report.missing_subgoals.push_back(goal);
  }

  report.policy_ok = report.missing_skills.empty();
  report.reward_ok = report.missing_subgoals.empty();
  return report;
}

std::vector<HarnessVariant> default_harness_variants() {
  return {
      {"full", true, true},
      {"no_apis", true, false},
      {"no_cot", false, true},
      {"neither", false, false},
  };
}

std::vector<HarnessOutcome> success_rate_harness(
    LlmClient& client, const PromptBundle& base,
    const std::vector<HarnessVariant>& variants, std::size_t n_trials,
    TranscriptLog* transcript, double temperature) {
  if (n_trials == 0) throw Error("harness needs n_trials >= 1");

  const std::set<ForcePrimitive> ref_forces{
      ForcePrimitive::AttractTarget, ForcePrimitive::RepelNeighbors,
      ForcePrimitive::SyncVelocity};
  const std::set<ConditionPrimitive> ref_conditions{
      ConditionPrimitive::InsideRegion, ConditionPrimitive::CollisionFree,
      ConditionPrimitive::ExplorationDone};

  std::vector<HarnessOutcome> outcomes;
  for (const HarnessVariant& variant : variants) {
    PromptBundle bundle = base;
    bundle.include_cot = variant.include_cot;
    bundle.include_apis = variant.include_apis;

    HarnessOutcome outcome;
    outcome.variant = variant.name;
    outcome.trials = n_trials;
    for (std::size_t trial = 0; trial < n_trials; ++trial) {
      try {
        const ConstraintAnalysis analysis =
            run_constraint_analysis(client, bundle, transcript, temperature);
        const GenerationResult result =
            generate_functions(client, analysis, bundle, transcript, temperature);
        const ReviewReport review = review_functions(result, analysis);
        if (!review.passed()) {
          outcome.failure_reasons.push_back("review failed");
          continue;
        }
        std::set<ForcePrimitive> forces;
        for (const ForceTerm& t : result.policy_spec.force_terms) {
          forces.insert(t.primitive);
        }
        std::set<ConditionPrimitive> conditions;
        for (const ConditionTerm& t : result.reward_spec.condition_terms) {
          conditions.insert(t.primitive);
        }
        if (forces != ref_forces || conditions != ref_conditions) {
          outcome.failure_reasons.push_back("primitive sets differ from reference");
          continue;
        }
        ++outcome.successes;
      } catch (const Error& e) {
        outcome.failure_reasons.push_back(e.what());
      }
    }
    outcome.fraction = static_cast<double>(outcome.successes) /
                       static_cast<double>(outcome.trials);
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

}  // namespace lamarl
