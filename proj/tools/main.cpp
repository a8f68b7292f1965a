#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lamarl/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Shape-assembly swarm training with LLM-generated behaviors"};
  app.require_subcommand(1);

  // train
  std::string train_config;
  lamarl::TrainOptions train_opts;
  std::uint64_t train_seed = 0;
  bool train_seed_set = false;
  std::string train_reward, train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a policy");
  train_cmd->add_option("--config", train_config, "Experiment config (JSON)")
      ->required();
  train_cmd->add_option("--seed", train_seed, "Override the training seed")
      ->each([&](const std::string&) { train_seed_set = true; });
  train_cmd->add_flag("--no-prior", train_opts.no_prior,
                      "Disable the prior policy (alpha forced to 0)");
  train_cmd->add_option("--reward", train_reward, "Reward choice: llm | mdr");
  train_cmd->add_option("--out", train_out, "Output directory override");

  // eval
  lamarl::EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Roll out a checkpoint and report metrics");
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint_path, "Checkpoint file")
      ->required();
  eval_cmd->add_option("--shapes", eval_opts.shapes_path, "Shape file or directory")
      ->required();
  eval_cmd->add_option("--scale", eval_opts.region_scale, "Meters per cell");
  eval_cmd->add_option("--steps", eval_opts.n_steps, "Rollout length");
  eval_cmd->add_option("--window", eval_opts.final_window,
                       "Trailing steps for the metric stats");
  eval_cmd->add_option("--seed", eval_opts.seed, "Evaluation seed");
  eval_cmd->add_option("--out", eval_opts.output_dir, "Output directory");
  eval_cmd->add_flag("--prior", eval_opts.use_prior_controller,
                     "Roll the reference prior policy instead of the actor");

  // ablate-prior
  std::string ablate_config;
  lamarl::AblatePriorOptions ablate_opts;
  std::vector<std::uint64_t> ablate_seeds;
  std::string ablate_out;
  auto* ablate_cmd =
      app.add_subcommand("ablate-prior", "Paired with/without-prior trainings");
  ablate_cmd->add_option("--config", ablate_config, "Experiment config (JSON)")
      ->required();
  ablate_cmd->add_option("--seeds", ablate_seeds, "Seeds for the paired runs");
  ablate_cmd->add_option("--out", ablate_out, "Output directory");
  ablate_cmd->add_option("--window", ablate_opts.window,
                         "Convergence window (episodes)");
  ablate_cmd->add_option("--band", ablate_opts.band,
                         "Relative convergence band");

  // generate
  lamarl::GenerateOptions gen_opts;
  auto* gen_cmd =
      app.add_subcommand("generate", "Run the function-generation pipeline");
  gen_cmd->add_option("--stub-llm", gen_opts.stub_dir,
                      "Directory of stub fixtures (omit for a live endpoint)");
  gen_cmd->add_option("--model", gen_opts.model, "Model id for live requests");
  gen_cmd->add_option("--out", gen_opts.output_dir, "Output directory");
  gen_cmd->add_option("--temperature", gen_opts.temperature, "Sampling temperature");
  gen_cmd->add_flag("--human-review", gen_opts.human_review,
                    "Print the review report and wait for confirmation");

  // ablate-prompt
  lamarl::AblatePromptOptions prompt_opts;
  auto* prompt_cmd = app.add_subcommand(
      "ablate-prompt", "Success-rate harness over prompt variants");
  prompt_cmd->add_option("--stub-llm", prompt_opts.stub_dir,
                         "Directory of stub fixtures");
  prompt_cmd->add_option("--model", prompt_opts.model, "Model id for live requests");
  prompt_cmd->add_option("--trials", prompt_opts.n_trials, "Trials per variant");
  prompt_cmd->add_option("--out", prompt_opts.output_dir, "Output directory");
  prompt_cmd->add_option("--temperature", prompt_opts.temperature,
                         "Sampling temperature");

  // export-plots
  lamarl::ExportPlotsOptions plot_opts;
  auto* plot_cmd =
      app.add_subcommand("export-plots", "Emit per-figure CSVs from train logs");
  plot_cmd->add_option("--train-log", plot_opts.labeled_logs,
                       "label=path/to/train_log.csv (repeatable)");
  plot_cmd->add_option("--out", plot_opts.output_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      if (train_seed_set) train_opts.seed = train_seed;
      if (!train_reward.empty()) train_opts.reward_choice = train_reward;
      if (!train_out.empty()) train_opts.output_dir = train_out;
      return lamarl::cmd_train(train_config, train_opts);
    }
    if (*eval_cmd) return lamarl::cmd_eval(eval_opts);
    if (*ablate_cmd) {
      ablate_opts.seeds = ablate_seeds;
      if (!ablate_out.empty()) ablate_opts.output_dir = ablate_out;
      return lamarl::cmd_ablate_prior(ablate_config, ablate_opts);
    }
    if (*gen_cmd) return lamarl::cmd_generate(gen_opts);
    if (*prompt_cmd) return lamarl::cmd_ablate_prompt(prompt_opts);
    if (*plot_cmd) return lamarl::cmd_export_plots(plot_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
