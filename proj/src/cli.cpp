#include "lamarl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lamarl/llm_client.hpp"
#include "lamarl/llmgen.hpp"

namespace lamarl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << text;
}

std::string resolve_path(const fs::path& base_dir, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return path.string();
  return (base_dir / path).string();
}

}  // namespace

void load_shapes(const std::string& path, double scale,
                 std::vector<std::string>* names,
                 std::vector<GridRegion>* shapes) {
  names->clear();
  shapes->clear();
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".txt" || ext == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      names->push_back(f.stem().string());
      shapes->push_back(load_region_file(f.string(), scale));
    }
  } else {
    names->push_back(fs::path(path).stem().string());
    shapes->push_back(load_region_file(path, scale));
  }
  if (shapes->empty()) throw Error("no shapes found at " + path);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& ex) {
    throw Error("config " + path + " is not valid JSON: " + ex.what());
  }
  const fs::path base = fs::absolute(fs::path(path)).parent_path();

  ExperimentConfig cfg;
  if (j.contains("env")) cfg.env = env_config_from_json(j["env"].dump());
  if (j.contains("train")) cfg.train = train_config_from_json(j["train"].dump());
  cfg.region_scale = j.value("region_scale", cfg.region_scale);
  cfg.shapes_path = resolve_path(base, j.value("shapes", std::string{}));
  cfg.policy_spec_path = resolve_path(base, j.value("policy_spec", std::string{}));
  cfg.reward_spec_path = resolve_path(base, j.value("reward_spec", std::string{}));
  cfg.reward_choice = j.value("reward", cfg.reward_choice);
  cfg.use_prior = j.value("use_prior", cfg.use_prior);
  cfg.output_dir = resolve_path(base, j.value("output_dir", cfg.output_dir));

  if (cfg.shapes_path.empty()) throw Error("config is missing 'shapes'");
  if (cfg.reward_choice != "llm" && cfg.reward_choice != "mdr") {
    throw Error("config 'reward' must be 'llm' or 'mdr'");
  }
  cfg.env.validate();
  cfg.train.validate();

  load_shapes(cfg.shapes_path, cfg.region_scale, &cfg.shape_names, &cfg.shapes);
  for (std::size_t i = 0; i < cfg.shapes.size(); ++i) {
    if (!capacity_check(cfg.env.n_robot, cfg.env.r_avoid, cfg.shapes[i])) {
      throw Error("shape '" + cfg.shape_names[i] +
                  "' fails the capacity check for " +
                  std::to_string(cfg.env.n_robot) + " robots");
    }
  }

  cfg.policy_spec = cfg.policy_spec_path.empty()
                        ? reference_policy_spec(cfg.env.r_avoid)
                        : spec_from_json(read_file(cfg.policy_spec_path));
  cfg.reward_spec = cfg.reward_spec_path.empty()
                        ? reference_reward_spec()
                        : spec_from_json(read_file(cfg.reward_spec_path));
  if (cfg.policy_spec.kind != SpecKind::Policy) {
    throw Error("policy_spec file does not hold a policy spec");
  }
  if (cfg.reward_spec.kind != SpecKind::Reward) {
    throw Error("reward_spec file does not hold a reward spec");
  }
  return cfg;
}

RewardFn make_reward_fn(const ExperimentConfig& cfg) {
  if (cfg.reward_choice == "mdr") {
    return [](const LocalView& view) { return mdr_reward(view); };
  }
  const BehaviorSpec spec = cfg.reward_spec;
  return [spec](const LocalView& view) { return llm_reward(view, spec); };
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
  json j;
  j["env"] = json::parse(env_config_to_json(cfg.env));
  j["train"] = json::parse(train_config_to_json(cfg.train));
  j["shapes"] = cfg.shapes_path;
  j["shape_names"] = cfg.shape_names;
  j["region_scale"] = cfg.region_scale;
  j["reward"] = cfg.reward_choice;
  j["use_prior"] = cfg.use_prior;
  j["policy_spec"] = json::parse(spec_to_json(cfg.policy_spec));
  j["reward_spec"] = json::parse(spec_to_json(cfg.reward_spec));
  j["output_dir"] = cfg.output_dir;
  return j.dump(2);
}

void write_train_log_csv(const std::string& path,
                         const std::vector<EpisodeLog>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write train log: " + path);
  out << "# train_log v1\n";
  out << "episode,mean_reward,M1,M2,actor_loss,critic_loss,collisions\n";
  for (const EpisodeLog& e : log) {
    out << e.episode << ',' << fmt_g(e.mean_reward) << ',' << fmt_g(e.m1) << ','
        << fmt_g(e.m2) << ',' << fmt_g(e.actor_loss) << ','
        << fmt_g(e.critic_loss) << ',' << e.collisions << '\n';
  }
}

std::vector<EpisodeLog> read_train_log_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open train log: " + path);
  std::vector<EpisodeLog> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("episode,", 0) == 0) continue;
    EpisodeLog e;
    std::istringstream row(line);
    char comma;
    row >> e.episode >> comma >> e.mean_reward >> comma >> e.m1 >> comma >>
        e.m2 >> comma >> e.actor_loss >> comma >> e.critic_loss >> comma >>
        e.collisions;
    if (!row && row.eof() && line.find(',') == std::string::npos) continue;
    log.push_back(e);
  }
  return log;
}

int cmd_train(const std::string& config_path, const TrainOptions& options) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (options.seed) cfg.train.seed = *options.seed;
  if (options.reward_choice) cfg.reward_choice = *options.reward_choice;
  if (options.no_prior) cfg.use_prior = false;
  if (options.output_dir) cfg.output_dir = *options.output_dir;
  if (cfg.reward_choice != "llm" && cfg.reward_choice != "mdr") {
    throw Error("--reward must be 'llm' or 'mdr'");
  }

  fs::create_directories(cfg.output_dir);

  json manifest;
  manifest["version"] = 1;
  manifest["command"] = "train";
  manifest["seed"] = cfg.train.seed;
  manifest["config"] = json::parse(resolved_config_json(cfg));
  write_file((fs::path(cfg.output_dir) / "manifest.json").string(),
             manifest.dump(2) + "\n");

  const BehaviorSpec* prior = cfg.use_prior ? &cfg.policy_spec : nullptr;
  TrainResult result =
      train(cfg.env, cfg.train, cfg.shapes, prior, make_reward_fn(cfg));

  write_train_log_csv((fs::path(cfg.output_dir) / "train_log.csv").string(),
                      result.log);
  save_checkpoint((fs::path(cfg.output_dir) / "checkpoint.json").string(),
                  result, cfg.env, cfg.train);
  if (result.grad_clip_events > 0) {
    std::cerr << "note: gradient clipping fired " << result.grad_clip_events
              << " times\n";
  }
  std::cout << "trained " << result.episodes_completed << " episodes -> "
            << cfg.output_dir << "\n";
  return 0;
}

Controller actor_controller(const Mlp<float>& actor) {
  return [&actor](const std::vector<Observation>& obs,
                  const std::vector<LocalView>&) {
    std::vector<Vec2> actions;
    actions.reserve(obs.size());
    for (const Observation& o : obs) actions.push_back(actor_act(actor, o.values));
    return actions;
  };
}

Controller prior_controller(const BehaviorSpec& spec, double f_max) {
  return [spec, f_max](const std::vector<Observation>&,
                       const std::vector<LocalView>& views) {
    std::vector<Vec2> actions;
    actions.reserve(views.size());
    for (const LocalView& v : views) actions.push_back(prior_policy(v, spec, f_max));
    return actions;
  };
}

EvalStats rollout_metrics(SwarmEnv& env, const Controller& controller,
                          std::size_t n_steps, std::size_t window,
                          std::ostream* step_csv, std::ostream* trajectory) {
  if (n_steps == 0) throw Error("rollout needs n_steps >= 1");
  window = std::min(window, n_steps);

  EvalStats stats;
  stats.steps = n_steps;
  stats.window = window;

  std::vector<double> m1s, m2s;
  m1s.reserve(n_steps);
  m2s.reserve(n_steps);

  std::vector<Vec2> actions;
  std::vector<Observation> observations;
  observations.reserve(env.swarm().size());
  for (const LocalView& v : env.views()) {
    observations.push_back(flatten_observation(v, env.config()));
  }

  for (std::size_t t = 0; t < n_steps; ++t) {
    actions = controller(observations, env.views());
    StepResult sr = env.step(actions);
    observations = std::move(sr.observations);

    const double m1 = env.coverage();
    const double m2 = env.uniformity_metric();
    m1s.push_back(m1);
    m2s.push_back(m2);
    if (t + window >= n_steps) stats.window_collisions += sr.collisions.size();

    if (step_csv) {
      (*step_csv) << t << ',' << fmt_g(m1) << ',' << fmt_g(m2) << ','
                  << sr.collisions.size() << '\n';
    }
    if (trajectory) {
      (*trajectory) << trajectory_record_json(t, env.swarm(), m1, m2,
                                              sr.collisions)
                    << '\n';
    }
  }

  const auto mean_std = [](const std::vector<double>& xs, std::size_t window) {
    const std::size_t start = xs.size() - window;
    double mean = 0.0;
    for (std::size_t i = start; i < xs.size(); ++i) mean += xs[i];
    mean /= static_cast<double>(window);
    double var = 0.0;
    for (std::size_t i = start; i < xs.size(); ++i) {
      var += (xs[i] - mean) * (xs[i] - mean);
    }
    var /= static_cast<double>(window);
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  std::tie(stats.m1_mean, stats.m1_std) = mean_std(m1s, window);
  std::tie(stats.m2_mean, stats.m2_std) = mean_std(m2s, window);
  return stats;
}

int cmd_eval(const EvalOptions& options) {
  Checkpoint ck = load_checkpoint(options.checkpoint_path);
  if (options.shapes_path.empty()) throw Error("eval needs --shapes");

  std::vector<std::string> names;
  std::vector<GridRegion> shapes;
  load_shapes(options.shapes_path, options.region_scale, &names, &shapes);

  fs::create_directories(options.output_dir);
  std::ofstream table((fs::path(options.output_dir) / "metrics.csv").string(),
                      std::ios::binary);
  table << "# eval_metrics v1\n";
  table << "shape,M1_mean,M1_std,M2_mean,M2_std,collisions,steps,window,status\n";

  const Controller controller =
      options.use_prior_controller
          ? prior_controller(reference_policy_spec(ck.env_cfg.r_avoid),
                             ck.env_cfg.f_max)
          : actor_controller(ck.nets.actor);

  for (std::size_t s = 0; s < shapes.size(); ++s) {
    if (!capacity_check(ck.env_cfg.n_robot, ck.env_cfg.r_avoid, shapes[s])) {
      std::cerr << "warning: shape '" << names[s]
                << "' fails the capacity check; skipped\n";
      table << names[s] << ",,,,,,,," << "skipped_capacity\n";
      continue;
    }
    SwarmEnv env(ck.env_cfg, nullptr, derive_seed(options.seed, 100 + s));
    env.reset_with_region(shapes[s]);

    std::ofstream steps_csv(
        (fs::path(options.output_dir) / (names[s] + "_steps.csv")).string(),
        std::ios::binary);
    steps_csv << "step,M1,M2,n_collisions\n";
    std::ofstream traj(
        (fs::path(options.output_dir) / (names[s] + "_trajectory.jsonl")).string(),
        std::ios::binary);

    EvalStats stats = rollout_metrics(env, controller, options.n_steps,
                                      options.final_window, &steps_csv, &traj);
    stats.shape = names[s];
    table << stats.shape << ',' << fmt_g(stats.m1_mean) << ','
          << fmt_g(stats.m1_std) << ',' << fmt_g(stats.m2_mean) << ','
          << fmt_g(stats.m2_std) << ',' << stats.window_collisions << ','
          << stats.steps << ',' << stats.window << ",ok\n";
  }
  std::cout << "eval written to " << options.output_dir << "\n";
  return 0;
}

std::optional<std::size_t> first_convergence_episode(
    const std::vector<EpisodeLog>& log, std::size_t window, double band) {
  if (log.size() < window || window == 0) return std::nullopt;

  std::vector<double> trailing(log.size() - window + 1, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    acc += log[i].m2;
    if (i + 1 >= window) {
      if (i >= window) acc -= log[i - window].m2;
      trailing[i + 1 - window] = acc / static_cast<double>(window);
    }
  }
  const double final_value = trailing.back();
  const double tol = band * std::abs(final_value);
  for (std::size_t k = 0; k < trailing.size(); ++k) {
    if (std::abs(trailing[k] - final_value) <= tol) {
      return k + window - 1;  // episode index where the window ends
    }
  }
  return log.size() - 1;
}

int cmd_ablate_prior(const std::string& config_path,
                     const AblatePriorOptions& options) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  const std::string out_dir =
      options.output_dir.value_or(cfg.output_dir + "_ablate_prior");
  fs::create_directories(out_dir);

  std::vector<std::uint64_t> seeds = options.seeds;
  if (seeds.empty()) seeds = {cfg.train.seed};

  std::ofstream report((fs::path(out_dir) / "sample_efficiency.csv").string(),
                       std::ios::binary);
  report << "# sample_efficiency v1\n";
  report << "seed,converge_with,converge_without,SE\n";

  std::vector<double> ses;
  for (const std::uint64_t seed : seeds) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.train.seed = seed;

    TrainResult with_prior = train(run_cfg.env, run_cfg.train, run_cfg.shapes,
                                   &run_cfg.policy_spec, make_reward_fn(run_cfg));
    TrainResult without_prior = train(run_cfg.env, run_cfg.train, run_cfg.shapes,
                                      nullptr, make_reward_fn(run_cfg));

    write_train_log_csv(
        (fs::path(out_dir) / ("with_prior_seed" + std::to_string(seed) + ".csv"))
            .string(),
        with_prior.log);
    write_train_log_csv(
        (fs::path(out_dir) /
         ("without_prior_seed" + std::to_string(seed) + ".csv"))
            .string(),
        without_prior.log);

    const auto conv_with =
        first_convergence_episode(with_prior.log, options.window, options.band);
    const auto conv_without = first_convergence_episode(
        without_prior.log, options.window, options.band);
    if (!conv_with || !conv_without || *conv_with == 0) {
      report << seed << ",,," << "undefined\n";
      continue;
    }
    const double se = static_cast<double>(*conv_without) /
                      static_cast<double>(*conv_with);
    ses.push_back(se);
    report << seed << ',' << *conv_with << ',' << *conv_without << ','
           << fmt_g(se) << '\n';
  }

  double median_se = std::numeric_limits<double>::quiet_NaN();
  if (!ses.empty()) {
    std::sort(ses.begin(), ses.end());
    median_se = ses.size() % 2 ? ses[ses.size() / 2]
                               : 0.5 * (ses[ses.size() / 2 - 1] + ses[ses.size() / 2]);
  }
  report << "# median_SE," << fmt_g(median_se) << '\n';
  std::cout << "median SE over " << ses.size() << " seeds: " << fmt_g(median_se)
            << "\n";
  return ses.empty() ? 1 : 0;
}

int cmd_generate(const GenerateOptions& options) {
  fs::create_directories(options.output_dir);
  TranscriptLog transcript(
      (fs::path(options.output_dir) / "transcripts.jsonl").string());

  std::unique_ptr<LlmClient> client;
  if (!options.stub_dir.empty()) {
    client = std::make_unique<StubLlmClient>(
        StubLlmClient::from_directory(options.stub_dir));
  } else {
    client = std::make_unique<HttpLlmClient>(HttpLlmClient::from_env(
        options.model, [](const std::string& line) { std::cerr << line << "\n"; }));
  }

  const PromptBundle bundle = reference_bundle();
  const ConstraintAnalysis analysis =
      run_constraint_analysis(*client, bundle, &transcript, options.temperature);
  const GenerationResult result = generate_functions(
      *client, analysis, bundle, &transcript, options.temperature);
  const ReviewReport review = review_functions(result, analysis);

  write_file((fs::path(options.output_dir) / "policy.json").string(),
             spec_to_json(result.policy_spec) + "\n");
  write_file((fs::path(options.output_dir) / "reward.json").string(),
             spec_to_json(result.reward_spec) + "\n");

  json review_json;
  review_json["policy_ok"] = review.policy_ok;
  review_json["reward_ok"] = review.reward_ok;
  review_json["missing_skills"] = review.missing_skills;
  review_json["missing_subgoals"] = review.missing_subgoals;
  write_file((fs::path(options.output_dir) / "review.json").string(),
             review_json.dump(2) + "\n");

  std::cout << "review: policy " << (review.policy_ok ? "ok" : "FAILED")
            << ", reward " << (review.reward_ok ? "ok" : "FAILED") << "\n";
  for (const std::string& s : review.missing_skills) {
    std::cout << "  missing skill: " << s << "\n";
  }
  for (const std::string& s : review.missing_subgoals) {
    std::cout << "  missing sub-goal: " << s << "\n";
  }

  if (options.human_review) {
    std::cout << "accept these functions? [y/N] " << std::flush;
    std::string line;
    std::getline(std::cin, line);
    if (line != "y" && line != "Y" && line != "yes") {
      std::cout << "rejected by reviewer\n";
      return 1;
    }
  }
  return review.passed() ? 0 : 1;
}

int cmd_ablate_prompt(const AblatePromptOptions& options) {
  fs::create_directories(options.output_dir);
  TranscriptLog transcript(
      (fs::path(options.output_dir) / "transcripts.jsonl").string());

  std::unique_ptr<LlmClient> client;
  if (!options.stub_dir.empty()) {
    client = std::make_unique<StubLlmClient>(
        StubLlmClient::from_directory(options.stub_dir));
  } else {
    client = std::make_unique<HttpLlmClient>(HttpLlmClient::from_env(
        options.model, [](const std::string& line) { std::cerr << line << "\n"; }));
  }

  const std::vector<HarnessOutcome> outcomes =
      success_rate_harness(*client, reference_bundle(),
                           default_harness_variants(), options.n_trials,
                           &transcript, options.temperature);

  std::ofstream csv((fs::path(options.output_dir) / "success_rates.csv").string(),
                    std::ios::binary);
  csv << "# success_rates v1\n";
  csv << "variant,trials,successes,fraction\n";
  for (const HarnessOutcome& o : outcomes) {
    csv << o.variant << ',' << o.trials << ',' << o.successes << ','
        << fmt_g(o.fraction) << '\n';
    std::cout << o.variant << ": " << o.successes << "/" << o.trials << " = "
              << fmt_g(100.0 * o.fraction) << "%\n";
  }
  return 0;
}

int cmd_export_plots(const ExportPlotsOptions& options) {
  fs::create_directories(options.output_dir);
  std::ofstream m2((fs::path(options.output_dir) / "m2_curves.csv").string(),
                   std::ios::binary);
  std::ofstream m1((fs::path(options.output_dir) / "m1_curves.csv").string(),
                   std::ios::binary);
  m2 << "episode,label,M2\n";
  m1 << "episode,label,M1\n";
  for (const std::string& spec : options.labeled_logs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
      throw Error("expected label=path, got: " + spec);
    }
    const std::string label = spec.substr(0, eq);
    const std::vector<EpisodeLog> log = read_train_log_csv(spec.substr(eq + 1));
    for (const EpisodeLog& e : log) {
      m2 << e.episode << ',' << label << ',' << fmt_g(e.m2) << '\n';
      m1 << e.episode << ',' << label << ',' << fmt_g(e.m1) << '\n';
    }
  }
  std::cout << "plot data written to " << options.output_dir << "\n";
  return 0;
}

}  // namespace lamarl
