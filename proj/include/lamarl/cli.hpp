#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lamarl/behavior.hpp"
#include "lamarl/env.hpp"
#include "lamarl/maddpg.hpp"

namespace lamarl {

// Resolved experiment description: configs, shape library, behavior specs.
// Loaded from a JSON file; relative paths are resolved against the config
// file's directory.
struct ExperimentConfig {
  EnvConfig env;
  TrainConfig train;
  std::string shapes_path;       // file or directory of ASCII/PGM shapes
  double region_scale = 0.1;     // meters per cell
  std::string policy_spec_path;  // empty -> built-in reference spec
  std::string reward_spec_path;  // empty -> built-in reference spec
  std::string reward_choice = "llm";  // "llm" | "mdr"
  bool use_prior = true;
  std::string output_dir = "run";

  // Loaded artifacts.
  std::vector<std::string> shape_names;
  std::vector<GridRegion> shapes;
  BehaviorSpec policy_spec;
  BehaviorSpec reward_spec;
};

ExperimentConfig load_experiment_config(const std::string& path);

// Shape loading shared by commands: a single file or every *.txt/*.pgm in a
// directory, sorted by name.
void load_shapes(const std::string& path, double scale,
                 std::vector<std::string>* names,
                 std::vector<GridRegion>* shapes);

// Builds the per-robot reward function the environment applies each step.
RewardFn make_reward_fn(const ExperimentConfig& cfg);

std::string resolved_config_json(const ExperimentConfig& cfg);

struct TrainOptions {
  std::optional<std::uint64_t> seed;
  bool no_prior = false;  // forces alpha to 0 and zeroes stored prior actions
  std::optional<std::string> reward_choice;
  std::optional<std::string> output_dir;
};

// Trains per the config; writes checkpoint.json, train_log.csv, and
// manifest.json into the output directory.
int cmd_train(const std::string& config_path, const TrainOptions& options);

struct EvalOptions {
  std::string checkpoint_path;
  std::string shapes_path;  // empty -> shapes from the checkpointed config? must be given
  double region_scale = 0.1;
  std::size_t n_steps = 600;
  std::size_t final_window = 300;
  std::uint64_t seed = 0;
  std::string output_dir = "eval";
  bool use_prior_controller = false;  // roll the reference prior instead of the actor
};

int cmd_eval(const EvalOptions& options);

struct AblatePriorOptions {
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> output_dir;
  std::size_t window = 50;      // trailing episodes for the convergence mean
  double band = 0.05;           // relative band around the final value
};

int cmd_ablate_prior(const std::string& config_path,
                     const AblatePriorOptions& options);

struct GenerateOptions {
  std::string stub_dir;  // empty -> live client from LAMARL_LLM_URL/_KEY
  std::string model = "gpt-4o";
  std::string output_dir = "generated";
  bool human_review = false;
  double temperature = 0.0;
};

int cmd_generate(const GenerateOptions& options);

struct AblatePromptOptions {
  std::string stub_dir;
  std::string model = "gpt-4o";
  std::size_t n_trials = 200;
  std::string output_dir = "prompt_ablation";
  double temperature = 1.0;
};

int cmd_ablate_prompt(const AblatePromptOptions& options);

struct ExportPlotsOptions {
  std::vector<std::string> labeled_logs;  // "label=path/to/train_log.csv"
  std::string output_dir = "plots";
};

int cmd_export_plots(const ExportPlotsOptions& options);

// --- building blocks shared with the test suites ---

// Per-shape rollout statistics over the trailing window.
struct EvalStats {
  std::string shape;
  double m1_mean = 0.0, m1_std = 0.0;
  double m2_mean = 0.0, m2_std = 0.0;
  std::size_t window_collisions = 0;
  std::size_t steps = 0, window = 0;
};

using Controller =
    std::function<std::vector<Vec2>(const std::vector<Observation>&,
                                    const std::vector<LocalView>&)>;

Controller actor_controller(const Mlp<float>& actor);
Controller prior_controller(const BehaviorSpec& spec, double f_max);

// Rolls `env` (already reset) for n_steps; returns stats over the final
// `window` steps and optionally streams per-step metrics CSV rows
// (step,M1,M2,n_collisions) and JSONL trajectory records.
EvalStats rollout_metrics(SwarmEnv& env, const Controller& controller,
                          std::size_t n_steps, std::size_t window,
                          std::ostream* step_csv, std::ostream* trajectory);

// First episode whose trailing-window mean of M2 lies within `band`
// (relative) of the final trailing-window mean; nullopt when the log is
// shorter than the window.
std::optional<std::size_t> first_convergence_episode(
    const std::vector<EpisodeLog>& log, std::size_t window, double band);

// Canonical train-log CSV (versioned header):
//   episode,mean_reward,M1,M2,actor_loss,critic_loss,collisions
void write_train_log_csv(const std::string& path,
                         const std::vector<EpisodeLog>& log);
std::vector<EpisodeLog> read_train_log_csv(const std::string& path);

}  // namespace lamarl
