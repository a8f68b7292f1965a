#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "lamarl/behavior.hpp"
#include "lamarl/geometry.hpp"
#include "lamarl/region.hpp"
#include "lamarl/rng.hpp"

namespace lamarl {

struct RobotState {
  Vec2 p;
  Vec2 v;
  double m = 1.0;
};

struct SwarmState {
  std::vector<RobotState> robots;
  std::size_t size() const { return robots.size(); }
};

struct EnvConfig {
  std::size_t n_robot = 30;
  double r_sense = 0.4;
  double r_avoid = 0.1;
  std::size_t n_hn = 6;
  std::size_t n_hc = 80;
  double dt = 0.05;
  double f_max = 1.0;
  double k_contact = 50.0;
  std::size_t episode_length = 200;
  double mass = 1.0;
  double v_max = 1.0;          // speed cap; never reduces an unforced velocity
  double spawn_gap = 0.2;      // clearance between region edge and spawn lattice
  double arena_margin = 0.4;   // arena padding around region and spawn area

  std::size_t obs_dim() const { return 6 + 4 * n_hn + 2 * n_hc; }
  void validate() const;  // throws Error when invariants are violated
};

// Flat observation vector in sensing order:
//   [p, v (4) | neighbors (4*n_hn) | target offset (2) | cells (2*n_hc)]
// zero-padded to the fixed width 6 + 4*n_hn + 2*n_hc (the leading self and
// target entries together account for the 6).
struct Observation {
  std::vector<double> values;
};

struct StepResult {
  std::vector<Observation> observations;
  std::vector<double> rewards;
  std::vector<std::pair<int, int>> collisions;  // unordered pairs, i < j
  bool done = false;
};

// Robots within r_sense of robot i, nearest first (ties to the lower id),
// truncated to n_hn entries.
std::vector<std::size_t> sense_neighbors(std::size_t i, const SwarmState& swarm,
                                         const EnvConfig& cfg);

// Unoccupied cells with centers within r_sense of `pos`. When more than n_hc
// qualify, a uniform subsample of n_hc is drawn from rng; the result is
// ordered by ascending distance (ties to the lower cell index).
std::vector<std::size_t> sense_cells(const Vec2& pos, const GridRegion& region,
                                     const OccupancyMap& occupancy,
                                     const EnvConfig& cfg, Rng& rng);

// Center of the nearest unoccupied cell; falls back to the nearest cell when
// everything is occupied. Ties go to the lowest cell index.
Vec2 select_target_cell(const Vec2& pos, const GridRegion& region,
                        const OccupancyMap& occupancy);

LocalView build_local_view(std::size_t i, const SwarmState& swarm,
                           const GridRegion& region,
                           const OccupancyMap& occupancy, const EnvConfig& cfg,
                           Rng& rng);

// Flattens a view into the fixed-width observation. The target entry is the
// relative target position, rescaled to stay strictly inside the sensing
// radius so every non-pad relative entry has norm < r_sense.
Observation flatten_observation(const LocalView& view, const EnvConfig& cfg);

// Contact force on robot i: linear springs against overlapping robots plus
// identical springs against arena wall penetration. Exactly coincident robots
// push apart along x, away from the lower id.
Vec2 passive_force(std::size_t i, const SwarmState& swarm, const Rect& arena,
                   const EnvConfig& cfg);

using RewardFn = std::function<double(const LocalView&)>;

// One simulation instance: owns its swarm state, region, occupancy, step
// counter, and RNG stream. Not safe for concurrent use; run independent
// instances for parallelism.
class SwarmEnv {
 public:
  SwarmEnv(EnvConfig cfg, RewardFn reward, std::uint64_t seed);

  // Samples a region uniformly from the library and spawns the swarm on a
  // lattice below it. Returns the initial observations.
  std::vector<Observation> reset(const std::vector<GridRegion>& shape_library);
  std::vector<Observation> reset_with_region(GridRegion region);

  StepResult step(const std::vector<Vec2>& actions);

  const EnvConfig& config() const { return cfg_; }
  const SwarmState& swarm() const { return swarm_; }
  const GridRegion& region() const { return region_; }
  const OccupancyMap& occupancy() const { return occupancy_; }
  const Rect& arena() const { return arena_; }
  const std::vector<LocalView>& views() const { return views_; }
  std::size_t step_count() const { return step_count_; }
  std::size_t clamp_events() const { return clamp_events_; }

  double coverage() const;
  double uniformity_metric() const;

 private:
  void rebuild_views_and_observations(std::vector<Observation>* out);
  void place_swarm();

  EnvConfig cfg_;
  RewardFn reward_;
  Rng rng_;
  GridRegion region_;
  Rect arena_;
  SwarmState swarm_;
  OccupancyMap occupancy_;
  std::vector<LocalView> views_;
  std::size_t step_count_ = 0;
  std::size_t clamp_events_ = 0;
};

// One JSONL trajectory record:
// {"t":int,"p":[[x,y],...],"v":[[x,y],...],"M1":f,"M2":f,"collisions":[[i,j],...]}
std::string trajectory_record_json(std::size_t t, const SwarmState& swarm,
                                   double m1, double m2,
                                   const std::vector<std::pair<int, int>>& collisions);

}  // namespace lamarl
