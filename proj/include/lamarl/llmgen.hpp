#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lamarl/behavior.hpp"
#include "lamarl/llm_client.hpp"

namespace lamarl {

struct ApiSignature {
  std::string name;
  std::string params;
  std::string returns;
  std::string doc;
};

// User instruction plus the auxiliary prompt pieces (guiding questions and
// pre-implemented API signatures). The flags control exactly which sections
// assemble_prompt renders.
struct PromptBundle {
  std::string task_description;
  std::vector<std::string> cot_questions;
  std::vector<ApiSignature> api_signatures;
  bool include_cot = true;
  bool include_apis = true;
};

// The shape-assembly bundle used across the experiments.
PromptBundle reference_bundle();

// Renders: task section, then guiding questions (if flagged), then APIs (if
// flagged), with stable delimiters. Rejects an empty task.
std::string assemble_prompt(const PromptBundle& bundle);

struct ConstraintAnalysis {
  std::vector<std::string> constraints;
  std::vector<std::string> basic;
  std::vector<std::string> complex_;
  std::vector<std::string> basic_skills;
  std::vector<std::string> key_subgoals;

  void validate() const;  // basic/complex partition constraints; subgoals nonempty
};

struct GenerationResult {
  BehaviorSpec policy_spec;
  BehaviorSpec reward_spec;
  std::string raw_transcript;
  std::string model_id;
};

struct ReviewReport {
  bool policy_ok = false;
  bool reward_ok = false;
  std::vector<std::string> missing_skills;
  std::vector<std::string> missing_subgoals;

  bool passed() const { return policy_ok && reward_ok; }
};

// Raised when a model response cannot be parsed into the expected structure;
// carries the offending text.
class LlmParseError : public Error {
 public:
  LlmParseError(const std::string& message, std::string transcript)
      : Error(message), transcript_(std::move(transcript)) {}
  const std::string& transcript() const { return transcript_; }

 private:
  std::string transcript_;
};

// Step 2: the model answers the guiding questions with a structured JSON
// analysis (constraint lists, basic skills, key sub-goals).
ConstraintAnalysis run_constraint_analysis(LlmClient& client,
                                           const PromptBundle& bundle,
                                           TranscriptLog* transcript = nullptr,
                                           double temperature = 0.0);

// Step 3: the model emits the policy and reward functions as behavior-spec
// JSON, one request each; both are parsed and validated.
GenerationResult generate_functions(LlmClient& client,
                                    const ConstraintAnalysis& analysis,
                                    const PromptBundle& bundle,
                                    TranscriptLog* transcript = nullptr,
                                    double temperature = 0.0);

// Step 4: mechanical review. Each named skill/sub-goal is mapped through a
// fixed table to a primitive that must appear in the corresponding spec;
// unmapped names fail review rather than guess.
ReviewReport review_functions(const GenerationResult& result,
                              const ConstraintAnalysis& analysis);

// Fixed name-mapping table (v1). Lookup is case- and whitespace-insensitive.
std::optional<ForcePrimitive> skill_to_primitive(const std::string& skill);
std::optional<ConditionPrimitive> subgoal_to_primitive(const std::string& subgoal);

struct HarnessVariant {
  std::string name;
  bool include_cot = true;
  bool include_apis = true;
};

struct HarnessOutcome {
  std::string variant;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double fraction = 0.0;
  std::vector<std::string> failure_reasons;  // one entry per failed trial
};

std::vector<HarnessVariant> default_harness_variants();

// Runs the full pipeline n_trials times per variant. A trial succeeds when
// both specs parse, the review passes, and the primitive sets equal the
// reference sets. Individual trial failures are data, not errors.
std::vector<HarnessOutcome> success_rate_harness(
    LlmClient& client, const PromptBundle& base,
    const std::vector<HarnessVariant>& variants, std::size_t n_trials,
    TranscriptLog* transcript = nullptr, double temperature = 1.0);

}  // namespace lamarl
