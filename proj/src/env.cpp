#include "lamarl/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace lamarl {

void EnvConfig::validate() const {
  if (n_robot == 0) throw Error("n_robot must be >= 1");
  if (r_avoid <= 0.0) throw Error("r_avoid must be positive");
  if (r_sense <= 2.0 * r_avoid) throw Error("r_sense must exceed 2*r_avoid");
  if (n_hn < 1 || n_hc < 1) throw Error("n_hn and n_hc must be >= 1");
  if (dt <= 0.0) throw Error("dt must be positive");
  if (f_max <= 0.0) throw Error("f_max must be positive");
  if (k_contact < 0.0) throw Error("k_contact must be >= 0");
  if (episode_length == 0) throw Error("episode_length must be >= 1");
  if (mass <= 0.0) throw Error("mass must be positive");
  if (v_max <= 0.0) throw Error("v_max must be positive");
  if (spawn_gap < r_avoid) throw Error("spawn_gap must be >= r_avoid");
}

std::vector<std::size_t> sense_neighbors(std::size_t i, const SwarmState& swarm,
                                         const EnvConfig& cfg) {
  std::vector<std::size_t> ids;
  const Vec2 pi = swarm.robots[i].p;
  for (std::size_t j = 0; j < swarm.size(); ++j) {
    if (j == i) continue;
    if ((swarm.robots[j].p - pi).norm() < cfg.r_sense) ids.push_back(j);
  }
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    const double da = (swarm.robots[a].p - pi).squared_norm();
    const double db = (swarm.robots[b].p - pi).squared_norm();
    if (da != db) return da < db;
    return a < b;
  });
  if (ids.size() > cfg.n_hn) ids.resize(cfg.n_hn);
  return ids;
}

std::vector<std::size_t> sense_cells(const Vec2& pos, const GridRegion& region,
                                     const OccupancyMap& occupancy,
                                     const EnvConfig& cfg, Rng& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < region.n_cell(); ++k) {
    if (occupancy.occupied(k)) continue;
    if ((region.cell_centers[k] - pos).norm() < cfg.r_sense) {
      candidates.push_back(k);
    }
  }
  std::vector<std::size_t> chosen;
  if (candidates.size() > cfg.n_hc) {
    const std::vector<std::size_t> picks =
        rng.sample_without_replacement(candidates.size(), cfg.n_hc);
    chosen.reserve(cfg.n_hc);
    for (std::size_t p : picks) chosen.push_back(candidates[p]);
  } else {
    chosen = candidates;
  }
  std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
    const double da = (region.cell_centers[a] - pos).squared_norm();
    const double db = (region.cell_centers[b] - pos).squared_norm();
    if (da != db) return da < db;
    return a < b;
  });
  return chosen;
}

Vec2 select_target_cell(const Vec2& pos, const GridRegion& region,
                        const OccupancyMap& occupancy) {
  if (region.n_cell() == 0) throw Error("target selection on an empty region");
  std::size_t best = region.n_cell();
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < region.n_cell(); ++k) {
    if (occupancy.occupied(k)) continue;
    const double d2 = (region.cell_centers[k] - pos).squared_norm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  if (best == region.n_cell()) {
    // Everything occupied: fall back to the nearest cell.
    best = region.nearest_cell(pos);
  }
  return region.cell_centers[best];
}

LocalView build_local_view(std::size_t i, const SwarmState& swarm,
                           const GridRegion& region,
                           const OccupancyMap& occupancy, const EnvConfig& cfg,
                           Rng& rng) {
  const RobotState& self = swarm.robots[i];
  LocalView view;
  view.position = self.p;
  view.velocity = self.v;
  view.r_sense = cfg.r_sense;
  view.r_avoid = cfg.r_avoid;
  view.inside_region = region.contains(self.p);

  double min_d = cfg.r_sense;
  for (std::size_t j = 0; j < swarm.size(); ++j) {
    if (j == i) continue;
    min_d = std::min(min_d, (swarm.robots[j].p - self.p).norm());
  }
  view.min_neighbor_dist = min_d;

  for (std::size_t j : sense_neighbors(i, swarm, cfg)) {
    view.neighbors.push_back(
        {swarm.robots[j].p - self.p, swarm.robots[j].v - self.v});
  }

  view.target_rel = select_target_cell(self.p, region, occupancy) - self.p;

  for (std::size_t k : sense_cells(self.p, region, occupancy, cfg, rng)) {
    view.cell_rels.push_back(region.cell_centers[k] - self.p);
  }
  return view;
}

Observation flatten_observation(const LocalView& view, const EnvConfig& cfg) {
  Observation obs;
  obs.values.assign(cfg.obs_dim(), 0.0);
  std::size_t w = 0;
  obs.values[w++] = view.position.x;
  obs.values[w++] = view.position.y;
  obs.values[w++] = view.velocity.x;
  obs.values[w++] = view.velocity.y;

  const std::size_t n_nb = std::min<std::size_t>(view.neighbors.size(), cfg.n_hn);
  for (std::size_t k = 0; k < n_nb; ++k) {
    obs.values[w + 4 * k + 0] = view.neighbors[k].rel_p.x;
    obs.values[w + 4 * k + 1] = view.neighbors[k].rel_p.y;
    obs.values[w + 4 * k + 2] = view.neighbors[k].rel_v.x;
    obs.values[w + 4 * k + 3] = view.neighbors[k].rel_v.y;
  }
  w += 4 * cfg.n_hn;

  // The target may lie beyond the sensing radius; saturate its magnitude so
  // the entry stays strictly inside r_sense while keeping the direction.
  Vec2 target = view.target_rel;
  const double d = target.norm();
  if (d >= cfg.r_sense) {
    target = target * (cfg.r_sense * (1.0 - 1e-9) / d);
  }
  obs.values[w++] = target.x;
  obs.values[w++] = target.y;

  const std::size_t n_cells = std::min<std::size_t>(view.cell_rels.size(), cfg.n_hc);
  for (std::size_t k = 0; k < n_cells; ++k) {
    obs.values[w + 2 * k + 0] = view.cell_rels[k].x;
    obs.values[w + 2 * k + 1] = view.cell_rels[k].y;
  }
  return obs;
}

Vec2 passive_force(std::size_t i, const SwarmState& swarm, const Rect& arena,
                   const EnvConfig& cfg) {
  const Vec2 pi = swarm.robots[i].p;
  const double contact = 2.0 * cfg.r_avoid;
  Vec2 force;

  for (std::size_t j = 0; j < swarm.size(); ++j) {
    if (j == i) continue;
    const Vec2 diff = pi - swarm.robots[j].p;
    const double d = diff.norm();
    if (d >= contact) continue;
    Vec2 dir;
    if (d > 0.0) {
      dir = diff / d;
    } else {
      // Coincident robots: push apart along x, away from the lower id.
      dir = (i > j) ? Vec2{1.0, 0.0} : Vec2{-1.0, 0.0};
    }
    force += cfg.k_contact * (contact - d) * dir;
  }

  // Wall springs engage when the robot disk reaches past an arena edge.
  const double r = cfg.r_avoid;
  if (pi.x - r < arena.min.x) force.x += cfg.k_contact * (arena.min.x - (pi.x - r));
  if (pi.x + r > arena.max.x) force.x -= cfg.k_contact * ((pi.x + r) - arena.max.x);
  if (pi.y - r < arena.min.y) force.y += cfg.k_contact * (arena.min.y - (pi.y - r));
  if (pi.y + r > arena.max.y) force.y -= cfg.k_contact * ((pi.y + r) - arena.max.y);
  return force;
}

SwarmEnv::SwarmEnv(EnvConfig cfg, RewardFn reward, std::uint64_t seed)
    : cfg_(cfg),
      reward_(reward ? std::move(reward) : RewardFn([](const LocalView&) { return 0.0; })),
      rng_(seed) {
  cfg_.validate();
}

std::vector<Observation> SwarmEnv::reset(
    const std::vector<GridRegion>& shape_library) {
  if (shape_library.empty()) throw Error("shape library is empty");
  const std::size_t pick = static_cast<std::size_t>(
      shape_library.size() == 1 ? 0 : rng_.uniform_index(shape_library.size()));
  return reset_with_region(shape_library[pick]);
}

std::vector<Observation> SwarmEnv::reset_with_region(GridRegion region) {
  if (!capacity_check(cfg_.n_robot, cfg_.r_avoid, region)) {
    throw Error("region fails the capacity check for " +
                std::to_string(cfg_.n_robot) + " robots");
  }
  region_ = std::move(region);
  place_swarm();
  step_count_ = 0;
  occupancy_ = compute_occupancy(
      region_, [&] {
        std::vector<Vec2> ps;
        ps.reserve(swarm_.size());
        for (const RobotState& r : swarm_.robots) ps.push_back(r.p);
        return ps;
      }(), cfg_.r_avoid);
  std::vector<Observation> obs;
  rebuild_views_and_observations(&obs);
  return obs;
}

void SwarmEnv::place_swarm() {
  // Near-square lattice centered below the region, one robot per node.
  const std::size_t cols = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(cfg_.n_robot))));
  const std::size_t rows = (cfg_.n_robot + cols - 1) / cols;
  const double spacing = 2.5 * cfg_.r_avoid;

  const double cx = 0.5 * (region_.bounds.min.x + region_.bounds.max.x);
  const double x0 = cx - 0.5 * spacing * static_cast<double>(cols - 1);
  const double y0 = region_.bounds.min.y - cfg_.spawn_gap;

  swarm_.robots.assign(cfg_.n_robot, RobotState{});
  for (std::size_t i = 0; i < cfg_.n_robot; ++i) {
    const std::size_t r = i / cols;
    const std::size_t c = i % cols;
    swarm_.robots[i].p = {x0 + spacing * static_cast<double>(c),
                          y0 - spacing * static_cast<double>(r)};
    swarm_.robots[i].v = {0.0, 0.0};
    swarm_.robots[i].m = cfg_.mass;
  }

  // Arena: region plus spawn area, padded.
  const double pad = cfg_.arena_margin;
  Rect box = region_.bounds;
  for (const RobotState& r : swarm_.robots) {
    box.min.x = std::min(box.min.x, r.p.x - cfg_.r_avoid);
    box.min.y = std::min(box.min.y, r.p.y - cfg_.r_avoid);
    box.max.x = std::max(box.max.x, r.p.x + cfg_.r_avoid);
    box.max.y = std::max(box.max.y, r.p.y + cfg_.r_avoid);
  }
  arena_ = {{box.min.x - pad, box.min.y - pad}, {box.max.x + pad, box.max.y + pad}};
}

void SwarmEnv::rebuild_views_and_observations(std::vector<Observation>* out) {
  views_.clear();
  views_.reserve(swarm_.size());
  if (out) out->clear();
  for (std::size_t i = 0; i < swarm_.size(); ++i) {
    views_.push_back(
        build_local_view(i, swarm_, region_, occupancy_, cfg_, rng_));
    if (out) out->push_back(flatten_observation(views_.back(), cfg_));
  }
}

StepResult SwarmEnv::step(const std::vector<Vec2>& actions) {
  if (actions.size() != swarm_.size()) {
    throw Error("step expects one action per robot");
  }

  // Forces from the pre-step snapshot, then a semi-implicit Euler update.
  std::vector<Vec2> contact(swarm_.size());
  for (std::size_t i = 0; i < swarm_.size(); ++i) {
    contact[i] = passive_force(i, swarm_, arena_, cfg_);
  }
  for (std::size_t i = 0; i < swarm_.size(); ++i) {
    Vec2 f = actions[i];
    const Vec2 clamped = clamp_box(f, -cfg_.f_max, cfg_.f_max);
    if (!(clamped == f)) ++clamp_events_;
    f = clamped;
    if (!std::isfinite(f.x) || !std::isfinite(f.y)) {
      throw Error("non-finite action for robot " + std::to_string(i));
    }

    RobotState& rb = swarm_.robots[i];
    const double old_speed = rb.v.norm();
    Vec2 v = rb.v + (cfg_.dt / rb.m) * (f + contact[i]);
    // Speed cap that never alters an update which does not increase speed;
    // force-free motion stays bit-exact.
    const double limit = std::max(cfg_.v_max, old_speed);
    const double speed = v.norm();
    if (speed > limit) {
      v = v * (limit / speed);
      ++clamp_events_;
    }
    rb.v = v;
    rb.p += cfg_.dt * rb.v;
  }

  StepResult result;
  const double contact_dist = 2.0 * cfg_.r_avoid;
  for (std::size_t i = 0; i < swarm_.size(); ++i) {
    for (std::size_t j = i + 1; j < swarm_.size(); ++j) {
      if ((swarm_.robots[i].p - swarm_.robots[j].p).norm() < contact_dist) {
        result.collisions.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }

  std::vector<Vec2> positions;
  positions.reserve(swarm_.size());
  for (const RobotState& r : swarm_.robots) positions.push_back(r.p);
  occupancy_ = compute_occupancy(region_, positions, cfg_.r_avoid);

  rebuild_views_and_observations(&result.observations);
  result.rewards.reserve(swarm_.size());
  for (const LocalView& view : views_) result.rewards.push_back(reward_(view));

  ++step_count_;
  result.done = step_count_ >= cfg_.episode_length;
  return result;
}

double SwarmEnv::coverage() const {
  return static_cast<double>(occupancy_.occupied_count()) /
         static_cast<double>(region_.n_cell());
}

double SwarmEnv::uniformity_metric() const {
  std::vector<Vec2> positions;
  positions.reserve(swarm_.size());
  for (const RobotState& r : swarm_.robots) positions.push_back(r.p);
  return uniformity(region_, positions);
}

std::string trajectory_record_json(
    std::size_t t, const SwarmState& swarm, double m1, double m2,
    const std::vector<std::pair<int, int>>& collisions) {
  nlohmann::json j;
  j["t"] = t;
  nlohmann::json p = nlohmann::json::array();
  nlohmann::json v = nlohmann::json::array();
  for (const RobotState& r : swarm.robots) {
    p.push_back({r.p.x, r.p.y});
    v.push_back({r.v.x, r.v.y});
  }
  j["p"] = p;
  j["v"] = v;
  j["M1"] = m1;
  j["M2"] = m2;
  nlohmann::json c = nlohmann::json::array();
  for (const auto& [a, b] : collisions) c.push_back({a, b});
  j["collisions"] = c;
  return j.dump();
}

}  // namespace lamarl
