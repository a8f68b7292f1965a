#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lamarl/geometry.hpp"

namespace lamarl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Target shape discretized into square cells. Cell centers lie on a uniform
// grid with spacing l_cell; the marked cells form one 4-connected component.
// Coordinates are normalized so the bounding box's lower-left corner is the
// origin.
struct GridRegion {
  std::vector<Vec2> cell_centers;
  double l_cell = 0.0;
  Rect bounds;

  std::size_t n_cell() const { return cell_centers.size(); }

  // True when p lies inside the union of cell squares (boundary inclusive).
  bool contains(const Vec2& p) const;

  // Index of the cell center nearest to p; ties go to the lowest index.
  std::size_t nearest_cell(const Vec2& p) const;
};

// Per-cell occupancy. A cell is occupied when some robot is strictly within
// r_avoid of its center; the recorded occupant is the nearest such robot
// (ties to the lowest robot id).
struct OccupancyMap {
  // -1 marks a free cell.
  std::vector<int> occupant;

  bool occupied(std::size_t cell) const { return occupant[cell] >= 0; }
  std::size_t occupied_count() const;
};

// Parses an ASCII grid: lines of '#' (marked) and '.' (unmarked),
// rectangular. scale is the cell side length in meters.
GridRegion load_region_text(const std::string& text, double scale);

// Parses a PGM image (P2 or P5); pixels with value > 127 mark cells.
GridRegion load_region_pgm(const std::string& bytes, double scale);

// Loads from a file path, dispatching on content (PGM magic) vs ASCII grid.
GridRegion load_region_file(const std::string& path, double scale);

OccupancyMap compute_occupancy(const GridRegion& region,
                               const std::vector<Vec2>& positions,
                               double r_avoid);

// Coverage rate M1 = occupied cells / total cells, in [0, 1].
double coverage_rate(const GridRegion& region,
                     const std::vector<Vec2>& positions, double r_avoid);

// Uniformity M2: each cell is assigned to its nearest robot (ties to the
// lowest robot id); returns the variance of the per-robot cell counts.
// Rejects coincident robot positions.
double uniformity(const GridRegion& region, const std::vector<Vec2>& positions);

// Per-robot Voronoi cell counts backing M2; exposed for diagnostics/tests.
std::vector<std::size_t> voronoi_counts(const GridRegion& region,
                                        const std::vector<Vec2>& positions);

// True iff 4 * n_robot * r_avoid^2 <= n_cell * l_cell^2, i.e. the region has
// room for all robots.
bool capacity_check(std::size_t n_robot, double r_avoid,
                    const GridRegion& region);

}  // namespace lamarl
