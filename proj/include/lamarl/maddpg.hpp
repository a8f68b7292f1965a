#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lamarl/behavior.hpp"
#include "lamarl/env.hpp"
#include "lamarl/mlp.hpp"
#include "lamarl/rng.hpp"

namespace lamarl {

// One transition, augmented with the prior-policy action so the actor
// regularizer can be evaluated at update time. Stored in float to keep the
// buffer compact.
struct ReplayEntry {
  std::vector<float> o;
  std::array<float, 2> a{};
  float r = 0.0f;
  std::vector<float> o_next;
  bool done = false;
  std::array<float, 2> a_prior{};
};

template <typename Scalar>
struct Batch {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  Mat obs;       // obs_dim x B
  Mat actions;   // 2 x B
  Row rewards;   // 1 x B
  Mat obs_next;  // obs_dim x B
  Row done;      // 1 x B, 0 or 1
  Mat a_prior;   // 2 x B

  Eigen::Index size() const { return obs.cols(); }
};

// FIFO ring buffer with uniform without-replacement batch sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(ReplayEntry entry);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

  // Logical indexing, 0 = oldest entry still stored.
  const ReplayEntry& at(std::size_t logical) const;

  Batch<float> sample(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::vector<ReplayEntry> entries_;
};

struct TrainConfig {
  std::size_t episodes = 3000;
  std::size_t episode_length = 200;
  std::size_t batch_size = 512;
  std::size_t hidden_dim = 180;
  std::size_t n_hidden_layers = 3;
  double lr_critic = 1e-3;
  double lr_actor = 1e-4;
  double exploration_rate = 0.6;  // fraction of episodes over which noise decays
  double noise_scale = 0.1;
  double gamma = 0.99;
  double alpha = 1.0;  // prior-policy regularization weight
  double tau = 0.01;
  std::size_t buffer_capacity = 1000000;
  std::size_t update_every = 1;  // env steps per gradient step
  double grad_clip = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct UpdateStats {
  double loss = 0.0;
  bool clipped = false;
};

// Minimizes the TD error against y = r + gamma * (1 - done) * Q'(o', mu'(o')).
template <typename Scalar>
UpdateStats critic_update(Mlp<Scalar>& critic, const Mlp<Scalar>& target_actor,
                          const Mlp<Scalar>& target_critic,
                          const Batch<Scalar>& batch, Scalar gamma, Scalar lr,
                          Scalar grad_clip);

// Ascends mean[Q(o, mu(o)) - alpha * |mu(o) - a_prior|^2]; the critic's
// parameters are left untouched, gradients flow through its action input.
// Returned loss is the negated objective.
template <typename Scalar>
UpdateStats actor_update(Mlp<Scalar>& actor, const Mlp<Scalar>& critic,
                         const Batch<Scalar>& batch, Scalar alpha, Scalar lr,
                         Scalar grad_clip);

// mu(o) plus Gaussian exploration noise whose std decays linearly to zero
// over the first exploration_rate fraction of training; clamped into
// [-1, 1]^2. With zero std the actor output is returned exactly.
Vec2 explore_action(const Mlp<float>& actor, const std::vector<double>& obs,
                    double exploration_rate, double noise_scale,
                    double episode_progress, Rng& rng);

Eigen::VectorXf obs_to_vec(const std::vector<double>& obs);
Vec2 actor_act(const Mlp<float>& actor, const std::vector<double>& obs);

struct EpisodeLog {
  std::size_t episode = 0;
  double mean_reward = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  std::size_t collisions = 0;
};

struct TrainResult {
  Mlp<float> actor;
  Mlp<float> critic;
  Mlp<float> target_actor;
  Mlp<float> target_critic;
  std::vector<EpisodeLog> log;
  std::size_t episodes_completed = 0;
  std::size_t grad_clip_events = 0;
};

// Homogeneous-swarm MADDPG: one actor and one decentralized critic
// Q(o_i, a_i) shared by every robot. Prior actions are evaluated from `prior`
// at rollout time and stored with each transition; pass nullptr to train
// without a prior (the regularizer weight is forced to zero).
TrainResult train(const EnvConfig& env_cfg, const TrainConfig& train_cfg,
                  const std::vector<GridRegion>& shapes,
                  const BehaviorSpec* prior, RewardFn reward);

// Checkpoint I/O: versioned JSON with hex-encoded tensors; loads reproduce
// the saved parameters bit-exactly.
void save_checkpoint(const std::string& path, const TrainResult& result,
                     const EnvConfig& env_cfg, const TrainConfig& train_cfg);

struct Checkpoint {
  TrainResult nets;
  EnvConfig env_cfg;
  TrainConfig train_cfg;
};
Checkpoint load_checkpoint(const std::string& path);

// JSON round-trip for configs (checkpoints, manifests, config files).
std::string env_config_to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

// --- template definitions ---

template <typename Scalar>
UpdateStats critic_update(Mlp<Scalar>& critic, const Mlp<Scalar>& target_actor,
                          const Mlp<Scalar>& target_critic,
                          const Batch<Scalar>& batch, Scalar gamma, Scalar lr,
                          Scalar grad_clip) {
  using Mat = typename Mlp<Scalar>::Mat;
  const Eigen::Index b = batch.size();
  if (b == 0) throw Error("critic update on an empty batch");

  // TD target from the target networks, no gradient flow.
  const Mat a_next = target_actor.forward(batch.obs_next);
  Mat q_in_next(batch.obs_next.rows() + a_next.rows(), b);
  q_in_next << batch.obs_next, a_next;
  const Mat q_next = target_critic.forward(q_in_next);
  const Mat y = batch.rewards +
                gamma * (Mat::Ones(1, b) - batch.done).cwiseProduct(q_next);

  Mat q_in(batch.obs.rows() + batch.actions.rows(), b);
  q_in << batch.obs, batch.actions;
  typename Mlp<Scalar>::Cache cache;
  const Mat q = critic.forward_cached(q_in, cache);

  const Mat err = q - y;
  const Scalar loss = err.squaredNorm() / static_cast<Scalar>(b);
  if (!std::isfinite(static_cast<double>(loss))) {
    throw Error("critic update produced a non-finite TD loss");
  }

  const Mat dy = (Scalar(2) / static_cast<Scalar>(b)) * err;
  const auto grads = critic.backward(cache, dy);
  UpdateStats stats;
  stats.loss = static_cast<double>(loss);
  stats.clipped = critic.apply_gradients(grads, lr, grad_clip);
  return stats;
}

template <typename Scalar>
UpdateStats actor_update(Mlp<Scalar>& actor, const Mlp<Scalar>& critic,
                         const Batch<Scalar>& batch, Scalar alpha, Scalar lr,
                         Scalar grad_clip) {
  using Mat = typename Mlp<Scalar>::Mat;
  const Eigen::Index b = batch.size();
  if (b == 0) throw Error("actor update on an empty batch");
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(b);

  typename Mlp<Scalar>::Cache actor_cache;
  const Mat a = actor.forward_cached(batch.obs, actor_cache);

  Mat q_in(batch.obs.rows() + a.rows(), b);
  q_in << batch.obs, a;
  typename Mlp<Scalar>::Cache critic_cache;
  const Mat q = critic.forward_cached(q_in, critic_cache);

  const Mat diff = a - batch.a_prior;
  const Scalar objective =
      q.sum() * inv_b - alpha * diff.squaredNorm() * inv_b;
  if (!std::isfinite(static_cast<double>(objective))) {
    throw Error("actor update produced a non-finite objective");
  }

  // dObjective/da: through the critic's action input, minus the regularizer.
  const auto critic_grads =
      critic.backward(critic_cache, Mat::Constant(1, b, inv_b));
  const Mat dq_da = critic_grads.dx.bottomRows(a.rows());
  const Mat dobj_da = dq_da - (Scalar(2) * alpha * inv_b) * diff;

  // Gradient ascent == descent on the negated objective.
  const auto actor_grads = actor.backward(actor_cache, -dobj_da);
  UpdateStats stats;
  stats.loss = -static_cast<double>(objective);
  stats.clipped = actor.apply_gradients(actor_grads, lr, grad_clip);
  return stats;
}

}  // namespace lamarl
