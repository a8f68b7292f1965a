#include "lamarl/maddpg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace lamarl {

using nlohmann::json;

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error("replay buffer capacity must be >= 1");
  entries_.reserve(std::min<std::size_t>(capacity_, 1 << 20));
}

void ReplayBuffer::push(ReplayEntry entry) {
  if (size_ < capacity_) {
    entries_.push_back(std::move(entry));
    ++size_;
    head_ = size_ % capacity_;
  } else {
    entries_[head_] = std::move(entry);
    head_ = (head_ + 1) % capacity_;
  }
}

const ReplayEntry& ReplayBuffer::at(std::size_t logical) const {
  if (logical >= size_) throw Error("replay index out of range");
  if (size_ < capacity_) return entries_[logical];
  return entries_[(head_ + logical) % capacity_];
}

Batch<float> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0 || batch_size > size_) {
    throw Error("cannot sample " + std::to_string(batch_size) +
                " entries from a buffer of " + std::to_string(size_));
  }
  const std::vector<std::size_t> picks =
      rng.sample_without_replacement(size_, batch_size);

  const Eigen::Index obs_dim =
      static_cast<Eigen::Index>(entries_.front().o.size());
  const Eigen::Index b = static_cast<Eigen::Index>(batch_size);
  Batch<float> batch;
  batch.obs.resize(obs_dim, b);
  batch.actions.resize(2, b);
  batch.rewards.resize(1, b);
  batch.obs_next.resize(obs_dim, b);
  batch.done.resize(1, b);
  batch.a_prior.resize(2, b);

  for (Eigen::Index c = 0; c < b; ++c) {
    const ReplayEntry& e = entries_[picks[static_cast<std::size_t>(c)]];
    for (Eigen::Index r = 0; r < obs_dim; ++r) {
      batch.obs(r, c) = e.o[static_cast<std::size_t>(r)];
      batch.obs_next(r, c) = e.o_next[static_cast<std::size_t>(r)];
    }
    batch.actions(0, c) = e.a[0];
    batch.actions(1, c) = e.a[1];
    batch.a_prior(0, c) = e.a_prior[0];
    batch.a_prior(1, c) = e.a_prior[1];
    batch.rewards(0, c) = e.r;
    batch.done(0, c) = e.done ? 1.0f : 0.0f;
  }
  return batch;
}

void TrainConfig::validate() const {
  // episodes == 0 is allowed: train() then returns freshly initialized nets.
  if (episode_length == 0) throw Error("episode_length must be >= 1");
  if (batch_size == 0) throw Error("batch_size must be >= 1");
  if (hidden_dim == 0 || n_hidden_layers == 0) {
    throw Error("hidden_dim and n_hidden_layers must be >= 1");
  }
  if (lr_critic <= 0.0 || lr_actor <= 0.0) throw Error("learning rates must be positive");
  if (exploration_rate < 0.0 || exploration_rate > 1.0) {
    throw Error("exploration_rate must be in [0, 1]");
  }
  if (noise_scale < 0.0) throw Error("noise_scale must be >= 0");
  if (gamma <= 0.0 || gamma >= 1.0) throw Error("gamma must be in (0, 1)");
  if (alpha < 0.0) throw Error("alpha must be >= 0");
  if (tau <= 0.0 || tau > 1.0) throw Error("tau must be in (0, 1]");
  if (buffer_capacity < batch_size) {
    throw Error("buffer_capacity must be >= batch_size");
  }
  if (update_every == 0) throw Error("update_every must be >= 1");
}

Eigen::VectorXf obs_to_vec(const std::vector<double>& obs) {
  Eigen::VectorXf v(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = static_cast<float>(obs[i]);
  }
  return v;
}

Vec2 actor_act(const Mlp<float>& actor, const std::vector<double>& obs) {
  const Eigen::VectorXf out = actor.forward(obs_to_vec(obs));
  return {static_cast<double>(out(0)), static_cast<double>(out(1))};
}

Vec2 explore_action(const Mlp<float>& actor, const std::vector<double>& obs,
                    double exploration_rate, double noise_scale,
                    double episode_progress, Rng& rng) {
  Vec2 a = actor_act(actor, obs);
  double std = 0.0;
  if (exploration_rate > 0.0) {
    std = noise_scale * std::max(0.0, 1.0 - episode_progress / exploration_rate);
  }
  if (std > 0.0) {
    a.x += std * rng.gaussian();
    a.y += std * rng.gaussian();
    a = clamp_box(a, -1.0, 1.0);
  }
  return a;
}

namespace {

std::vector<std::size_t> mlp_sizes(std::size_t in, std::size_t hidden,
                                   std::size_t n_hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  for (std::size_t i = 0; i < n_hidden; ++i) sizes.push_back(hidden);
  sizes.push_back(out);
  return sizes;
}

}  // namespace

TrainResult train(const EnvConfig& env_cfg, const TrainConfig& train_cfg,
                  const std::vector<GridRegion>& shapes,
                  const BehaviorSpec* prior, RewardFn reward) {
  env_cfg.validate();
  train_cfg.validate();
  if (shapes.empty()) throw Error("training requires a nonempty shape library");
  if (prior) prior->validate(env_cfg.f_max);

  const std::size_t obs_dim = env_cfg.obs_dim();
  TrainResult result;
  result.actor = Mlp<float>::random(
      mlp_sizes(obs_dim, train_cfg.hidden_dim, train_cfg.n_hidden_layers, 2),
      OutputActivation::Tanh, derive_seed(train_cfg.seed, 1));
  result.critic = Mlp<float>::random(
      mlp_sizes(obs_dim + 2, train_cfg.hidden_dim, train_cfg.n_hidden_layers, 1),
      OutputActivation::Identity, derive_seed(train_cfg.seed, 2));
  result.target_actor = result.actor;
  result.target_critic = result.critic;

  if (train_cfg.episodes == 0) return result;

  SwarmEnv env(env_cfg, std::move(reward), derive_seed(train_cfg.seed, 3));
  Rng noise_rng(derive_seed(train_cfg.seed, 4));
  Rng sample_rng(derive_seed(train_cfg.seed, 5));
  ReplayBuffer buffer(train_cfg.buffer_capacity);

  const float alpha = prior ? static_cast<float>(train_cfg.alpha) : 0.0f;
  std::size_t global_step = 0;

  for (std::size_t ep = 0; ep < train_cfg.episodes; ++ep) {
    std::vector<Observation> obs = env.reset(shapes);
    const double progress =
        static_cast<double>(ep) / static_cast<double>(train_cfg.episodes);

    double reward_sum = 0.0;
    double actor_loss_sum = 0.0, critic_loss_sum = 0.0;
    std::size_t n_updates = 0;
    std::size_t collisions = 0;

    for (std::size_t t = 0; t < train_cfg.episode_length; ++t) {
      const std::size_t n = env_cfg.n_robot;
      std::vector<Vec2> actions(n), priors(n);
      for (std::size_t i = 0; i < n; ++i) {
        actions[i] = explore_action(result.actor, obs[i].values,
                                    train_cfg.exploration_rate,
                                    train_cfg.noise_scale, progress, noise_rng);
        priors[i] = prior ? prior_policy(env.views()[i], *prior, env_cfg.f_max)
                          : Vec2{};
      }

      StepResult sr;
      try {
        sr = env.step(actions);
      } catch (const Error& e) {
        throw Error("episode " + std::to_string(ep) + ": " + e.what());
      }
      collisions += sr.collisions.size();

      for (std::size_t i = 0; i < n; ++i) {
        ReplayEntry entry;
        entry.o.resize(obs_dim);
        entry.o_next.resize(obs_dim);
        for (std::size_t k = 0; k < obs_dim; ++k) {
          entry.o[k] = static_cast<float>(obs[i].values[k]);
          entry.o_next[k] = static_cast<float>(sr.observations[i].values[k]);
        }
        entry.a = {static_cast<float>(actions[i].x), static_cast<float>(actions[i].y)};
        entry.a_prior = {static_cast<float>(priors[i].x), static_cast<float>(priors[i].y)};
        entry.r = static_cast<float>(sr.rewards[i]);
        entry.done = sr.done;
        buffer.push(std::move(entry));
        reward_sum += sr.rewards[i];
      }
      obs = std::move(sr.observations);

      ++global_step;
      if (buffer.size() >= train_cfg.batch_size &&
          global_step % train_cfg.update_every == 0) {
        const Batch<float> batch = buffer.sample(train_cfg.batch_size, sample_rng);
        UpdateStats cs, as;
        try {
          cs = critic_update(result.critic, result.target_actor,
                             result.target_critic, batch,
                             static_cast<float>(train_cfg.gamma),
                             static_cast<float>(train_cfg.lr_critic),
                             static_cast<float>(train_cfg.grad_clip));
          as = actor_update(result.actor, result.critic, batch, alpha,
                            static_cast<float>(train_cfg.lr_actor),
                            static_cast<float>(train_cfg.grad_clip));
        } catch (const Error& e) {
          throw Error("episode " + std::to_string(ep) + ": " + e.what());
        }
        result.target_critic.soft_update_from(result.critic,
                                              static_cast<float>(train_cfg.tau));
        result.target_actor.soft_update_from(result.actor,
                                             static_cast<float>(train_cfg.tau));
        critic_loss_sum += cs.loss;
        actor_loss_sum += as.loss;
        result.grad_clip_events += (cs.clipped ? 1 : 0) + (as.clipped ? 1 : 0);
        ++n_updates;
      }
    }

    EpisodeLog log;
    log.episode = ep;
    log.mean_reward = reward_sum / static_cast<double>(train_cfg.episode_length *
                                                       env_cfg.n_robot);
    log.m1 = env.coverage();
    log.m2 = env.uniformity_metric();
    log.actor_loss = n_updates ? actor_loss_sum / static_cast<double>(n_updates) : 0.0;
    log.critic_loss = n_updates ? critic_loss_sum / static_cast<double>(n_updates) : 0.0;
    log.collisions = collisions;
    result.log.push_back(log);
    ++result.episodes_completed;
  }
  return result;
}

namespace {

json mlp_to_json(const Mlp<float>& net) {
  json j;
  j["output"] =
      net.output_activation() == OutputActivation::Tanh ? "tanh" : "identity";
  json layers = json::array();
  for (const auto& layer : net.layers()) {
    json jl;
    jl["rows"] = layer.w.rows();
    jl["cols"] = layer.w.cols();
    // Row-major traversal for the hex dump.
    std::vector<float> wdata;
    wdata.reserve(static_cast<std::size_t>(layer.w.size()));
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) {
        wdata.push_back(layer.w(r, c));
      }
    }
    jl["w"] = floats_to_hex(wdata.data(), wdata.size());
    std::vector<float> bdata(layer.b.data(), layer.b.data() + layer.b.size());
    jl["b"] = floats_to_hex(bdata.data(), bdata.size());
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j;
}

Mlp<float> mlp_from_json(const json& j) {
  const std::string out = j.at("output").get<std::string>();
  std::vector<std::size_t> sizes;
  const json& layers = j.at("layers");
  if (layers.empty()) throw Error("checkpoint mlp has no layers");
  sizes.push_back(layers[0].at("cols").get<std::size_t>());
  for (const json& jl : layers) sizes.push_back(jl.at("rows").get<std::size_t>());

  Mlp<float> net = Mlp<float>::zeros(
      sizes, out == "tanh" ? OutputActivation::Tanh : OutputActivation::Identity);
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    auto& layer = net.layers()[l];
    const std::vector<float> wdata =
        hex_to_floats(layers[l].at("w").get<std::string>());
    const std::vector<float> bdata =
        hex_to_floats(layers[l].at("b").get<std::string>());
    if (wdata.size() != static_cast<std::size_t>(layer.w.size()) ||
        bdata.size() != static_cast<std::size_t>(layer.b.size())) {
      throw Error("checkpoint tensor size mismatch");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) {
        layer.w(r, c) = wdata[k++];
      }
    }
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) {
      layer.b(r) = bdata[static_cast<std::size_t>(r)];
    }
  }
  return net;
}

json env_config_json(const EnvConfig& c) {
  json j;
  j["n_robot"] = c.n_robot;
  j["r_sense"] = c.r_sense;
  j["r_avoid"] = c.r_avoid;
  j["n_hn"] = c.n_hn;
  j["n_hc"] = c.n_hc;
  j["dt"] = c.dt;
  j["f_max"] = c.f_max;
  j["k_contact"] = c.k_contact;
  j["episode_length"] = c.episode_length;
  j["mass"] = c.mass;
  j["v_max"] = c.v_max;
  j["spawn_gap"] = c.spawn_gap;
  j["arena_margin"] = c.arena_margin;
  return j;
}

EnvConfig env_config_parse(const json& j) {
  EnvConfig c;
  c.n_robot = j.value("n_robot", c.n_robot);
  c.r_sense = j.value("r_sense", c.r_sense);
  c.r_avoid = j.value("r_avoid", c.r_avoid);
  c.n_hn = j.value("n_hn", c.n_hn);
  c.n_hc = j.value("n_hc", c.n_hc);
  c.dt = j.value("dt", c.dt);
  c.f_max = j.value("f_max", c.f_max);
  c.k_contact = j.value("k_contact", c.k_contact);
  c.episode_length = j.value("episode_length", c.episode_length);
  c.mass = j.value("mass", c.mass);
  c.v_max = j.value("v_max", c.v_max);
  c.spawn_gap = j.value("spawn_gap", c.spawn_gap);
  c.arena_margin = j.value("arena_margin", c.arena_margin);
  return c;
}

json train_config_json(const TrainConfig& c) {
  json j;
  j["episodes"] = c.episodes;
  j["episode_length"] = c.episode_length;
  j["batch_size"] = c.batch_size;
  j["hidden_dim"] = c.hidden_dim;
  j["n_hidden_layers"] = c.n_hidden_layers;
  j["lr_critic"] = c.lr_critic;
  j["lr_actor"] = c.lr_actor;
  j["exploration_rate"] = c.exploration_rate;
  j["noise_scale"] = c.noise_scale;
  j["gamma"] = c.gamma;
  j["alpha"] = c.alpha;
  j["tau"] = c.tau;
  j["buffer_capacity"] = c.buffer_capacity;
  j["update_every"] = c.update_every;
  j["grad_clip"] = c.grad_clip;
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_parse(const json& j) {
  TrainConfig c;
  c.episodes = j.value("episodes", c.episodes);
  c.episode_length = j.value("episode_length", c.episode_length);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.n_hidden_layers = j.value("n_hidden_layers", c.n_hidden_layers);
  c.lr_critic = j.value("lr_critic", c.lr_critic);
  c.lr_actor = j.value("lr_actor", c.lr_actor);
  c.exploration_rate = j.value("exploration_rate", c.exploration_rate);
  c.noise_scale = j.value("noise_scale", c.noise_scale);
  c.gamma = j.value("gamma", c.gamma);
  c.alpha = j.value("alpha", c.alpha);
  c.tau = j.value("tau", c.tau);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.update_every = j.value("update_every", c.update_every);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace

std::string env_config_to_json(const EnvConfig& cfg) {
  return env_config_json(cfg).dump(2);
}

EnvConfig env_config_from_json(const std::string& text) {
  return env_config_parse(json::parse(text));
}

std::string train_config_to_json(const TrainConfig& cfg) {
  return train_config_json(cfg).dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  return train_config_parse(json::parse(text));
}

void save_checkpoint(const std::string& path, const TrainResult& result,
                     const EnvConfig& env_cfg, const TrainConfig& train_cfg) {
  json j;
  j["version"] = 1;
  j["episode"] = result.episodes_completed;
  j["env"] = env_config_json(env_cfg);
  j["train"] = train_config_json(train_cfg);
  j["actor"] = mlp_to_json(result.actor);
  j["critic"] = mlp_to_json(result.critic);
  j["target_actor"] = mlp_to_json(result.target_actor);
  j["target_critic"] = mlp_to_json(result.target_critic);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw Error(std::string("malformed checkpoint: ") + ex.what());
  }
  if (j.value("version", 0) != 1) throw Error("unsupported checkpoint version");
  Checkpoint ck;
  ck.env_cfg = env_config_parse(j.at("env"));
  ck.train_cfg = train_config_parse(j.at("train"));
  ck.nets.actor = mlp_from_json(j.at("actor"));
  ck.nets.critic = mlp_from_json(j.at("critic"));
  ck.nets.target_actor = mlp_from_json(j.at("target_actor"));
  ck.nets.target_critic = mlp_from_json(j.at("target_critic"));
  ck.nets.episodes_completed = j.value("episode", std::size_t{0});
  return ck;
}

}  // namespace lamarl
