#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <limits>
#include <sstream>

#include "lamarl/region.hpp"
#include "lamarl/rng.hpp"

using namespace lamarl;

namespace {

// Independent nearest-assignment oracle for M2: plain O(n_cell * n_robot)
// loops, no shared code with the implementation's tie or variance handling.
double uniformity_oracle(const GridRegion& region,
                         const std::vector<Vec2>& positions) {
  std::vector<double> counts(positions.size(), 0.0);
  for (const Vec2& cell : region.cell_centers) {
    std::size_t winner = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const double dx = positions[i].x - cell.x;
      const double dy = positions[i].y - cell.y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) {
        best = d2;
        winner = i;
      }
    }
    counts[winner] += 1.0;
  }
  double mean = 0.0;
  for (double c : counts) mean += c;
  mean /= static_cast<double>(counts.size());
  double var = 0.0;
  for (double c : counts) var += (c - mean) * (c - mean);
  return var / static_cast<double>(counts.size());
}

GridRegion random_region(Rng& rng, std::size_t max_cells) {
  // Random connected blob grown cell by cell on an 8x8 canvas.
  const std::size_t n = 1 + rng.uniform_index(max_cells);
  std::ostringstream grid;
  std::vector<std::pair<int, int>> cells{{4, 4}};
  while (cells.size() < n) {
    const auto& [r, c] = cells[rng.uniform_index(cells.size())];
    const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
    const std::size_t k = rng.uniform_index(4);
    const std::pair<int, int> next{r + dr[k], c + dc[k]};
    if (next.first < 0 || next.first >= 8 || next.second < 0 || next.second >= 8)
      continue;
    if (std::find(cells.begin(), cells.end(), next) == cells.end()) {
      cells.push_back(next);
    }
  }
  std::vector<std::string> rows(8, std::string(8, '.'));
  for (const auto& [r, c] : cells) rows[r][c] = '#';
  for (const std::string& row : rows) grid << row << "\n";
  return load_region_text(grid.str(), 0.1);
}

}  // namespace

TEST_CASE("ascii loading counts marked cells") {
  const GridRegion r3 = load_region_text("###\n###\n###\n", 0.1);
  CHECK(r3.n_cell() == 9);
  CHECK(r3.l_cell == doctest::Approx(0.1));
  CHECK(r3.bounds.width() == doctest::Approx(0.3));
  CHECK(r3.bounds.height() == doctest::Approx(0.3));

  const GridRegion l = load_region_text("#..\n#..\n###\n", 0.1);
  CHECK(l.n_cell() == 5);
}

TEST_CASE("cell centers form a uniform grid with l_cell spacing") {
  const GridRegion r = load_region_text("##\n##\n", 0.5);
  REQUIRE(r.n_cell() == 4);
  // Nearest-neighbor spacing along grid axes equals l_cell.
  for (std::size_t i = 0; i < r.n_cell(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < r.n_cell(); ++j) {
      if (i != j) nearest = std::min(nearest, (r.cell_centers[i] - r.cell_centers[j]).norm());
    }
    CHECK(nearest == doctest::Approx(0.5));
  }
}

TEST_CASE("pgm loading marks pixels above 127") {
  // 20x20 canvas, 180 bright pixels: a solid top row plus 8 full columns and
  // one partial column, all 4-connected and spanning the canvas.
  std::vector<std::string> rows(20, std::string(20, '.'));
  std::size_t marked = 0;
  for (int c = 0; c < 20; ++c) {
    rows[0][c] = '#';
    ++marked;
  }
  for (int c = 0; c < 20 && marked < 180; c += 2) {
    for (int r = 1; r < 20 && marked < 180; ++r) {
      rows[r][c] = '#';
      ++marked;
    }
  }
  rows[1][19] = '#';  // reach the right edge below the top row
  ++marked;
  REQUIRE(marked == 181);
  rows[19][8] = '.';  // back to exactly 180
  --marked;

  std::ostringstream pgm;
  pgm << "P2\n20 20\n255\n";
  std::size_t histogram = 0;  // independent bright-pixel count
  for (const std::string& row : rows) {
    for (char ch : row) {
      const int v = ch == '#' ? 200 : 10;
      histogram += (v > 127);
      pgm << v << " ";
    }
    pgm << "\n";
  }
  REQUIRE(histogram == 180);

  const GridRegion region = load_region_pgm(pgm.str(), 0.1);
  CHECK(region.n_cell() == 180);
  CHECK(region.bounds.width() == doctest::Approx(2.0));
  CHECK(region.bounds.height() == doctest::Approx(2.0));
}

TEST_CASE("disconnected and empty shapes are rejected") {
  CHECK_THROWS_WITH_AS(load_region_text("#.#\n", 0.1),
                       doctest::Contains("component sizes 1 and 1"), Error);
  CHECK_THROWS_AS(load_region_text("...\n...\n", 0.1), Error);
  CHECK_THROWS_AS(load_region_text("", 0.1), Error);
  // Two components of sizes 3 and 1.
  CHECK_THROWS_WITH_AS(load_region_text("###..#\n", 0.1),
                       doctest::Contains("3 and 1"), Error);
}

TEST_CASE("occupancy uses a strict distance threshold") {
  const GridRegion r = load_region_text("##\n##\n", 0.1);
  SUBCASE("robot exactly on a center occupies that cell") {
    const OccupancyMap m = compute_occupancy(r, {r.cell_centers[0]}, 0.1);
    CHECK(m.occupied(0));
    CHECK(m.occupant[0] == 0);
    CHECK(m.occupied_count() == 1);
  }
  SUBCASE("distance exactly r_avoid does not occupy") {
    const GridRegion single = load_region_text("#\n", 0.1);
    const Vec2 cc = single.cell_centers[0];
    const OccupancyMap m = compute_occupancy(single, {{cc.x + 0.1, cc.y}}, 0.1);
    CHECK(m.occupied_count() == 0);
  }
  SUBCASE("two robots near two distinct centers occupy exactly those") {
    // Brute-force distance table cross-check.
    const std::vector<Vec2> ps{{r.cell_centers[0].x + 0.01, r.cell_centers[0].y},
                               {r.cell_centers[3].x, r.cell_centers[3].y - 0.02}};
    const OccupancyMap m = compute_occupancy(r, ps, 0.05);
    std::size_t expected = 0;
    for (std::size_t k = 0; k < r.n_cell(); ++k) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec2& p : ps) best = std::min(best, (p - r.cell_centers[k]).norm());
      expected += best < 0.05;
    }
    CHECK(expected == 2);
    CHECK(m.occupied_count() == 2);
    CHECK(m.occupied(0));
    CHECK(m.occupied(3));
    CHECK(m.occupant[0] == 0);
    CHECK(m.occupant[3] == 1);
  }
}

TEST_CASE("occupant ties break toward the lower robot id") {
  const GridRegion single = load_region_text("#\n", 1.0);
  const Vec2 c = single.cell_centers[0];
  // +-0.25 around c = (0.5, 0.5) is exactly representable: a true tie.
  const std::vector<Vec2> ps{{c.x - 0.25, c.y}, {c.x + 0.25, c.y}};
  const OccupancyMap m = compute_occupancy(single, ps, 0.5);
  CHECK(m.occupant[0] == 0);
}

TEST_CASE("coverage rate") {
  const GridRegion r = load_region_text("##\n##\n", 0.1);
  std::vector<Vec2> all = r.cell_centers;
  CHECK(coverage_rate(r, all, 0.05) == doctest::Approx(1.0));
  CHECK(coverage_rate(r, {{10.0, 10.0}}, 0.05) == doctest::Approx(0.0));
}

TEST_CASE("uniformity hand cases") {
  SUBCASE("two robots symmetric about a symmetric region") {
    const GridRegion r = load_region_text("####\n####\n", 0.1);
    const double cy = 0.5 * (r.bounds.min.y + r.bounds.max.y);
    const double cx = 0.5 * (r.bounds.min.x + r.bounds.max.x);
    CHECK(uniformity(r, {{cx - 0.1, cy}, {cx + 0.1, cy}}) == doctest::Approx(0.0));
  }
  SUBCASE("counts {2,4,6} give 8/3") {
    // 12 cells in a row; three robots placed so the nearest-assignment
    // counts are 2, 4, and 6.
    const GridRegion r = load_region_text("############\n", 1.0);
    // Cells are centered at x = 0.5 .. 11.5; the robot midpoints (2 and 6)
    // fall between cell centers, so no assignment ties occur.
    const std::vector<Vec2> ps{{1.0, 0.5}, {3.0, 0.5}, {9.0, 0.5}};
    const auto counts = voronoi_counts(r, ps);
    REQUIRE(counts.size() == 3);
    CHECK(counts[0] == 2);
    CHECK(counts[1] == 4);
    CHECK(counts[2] == 6);
    CHECK(uniformity(r, ps) == doctest::Approx(8.0 / 3.0));
  }
  SUBCASE("coincident robots are rejected") {
    const GridRegion r = load_region_text("##\n", 0.1);
    CHECK_THROWS_AS(uniformity(r, {{0.1, 0.1}, {0.1, 0.1}}), Error);
  }
}

TEST_CASE("capacity check") {
  GridRegion r;
  r.l_cell = 0.1;
  r.cell_centers.assign(180, Vec2{});
  CHECK(capacity_check(30, 0.1, r));   // 1.2 <= 1.8
  CHECK(capacity_check(0, 0.1, r));    // 0 <= anything
  r.cell_centers.assign(100, Vec2{});
  CHECK_FALSE(capacity_check(50, 0.1, r));  // 2.0 > 1.0
}

TEST_CASE("uniformity matches the brute-force oracle on random instances") {
  Rng rng(20240809);
  for (int iter = 0; iter < 500; ++iter) {
    const GridRegion region = random_region(rng, 20);
    const std::size_t n_robot = 1 + rng.uniform_index(6);
    std::vector<Vec2> ps;
    for (std::size_t i = 0; i < n_robot; ++i) {
      ps.push_back({rng.uniform(-0.2, 1.0), rng.uniform(-0.2, 1.0)});
    }
    CHECK(uniformity(region, ps) == uniformity_oracle(region, ps));

    // Partition property: the per-robot counts cover every cell once.
    const auto counts = voronoi_counts(region, ps);
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    CHECK(total == region.n_cell());

    // Coverage bounds and monotonicity under robot insertion.
    const double m1 = coverage_rate(region, ps, 0.08);
    CHECK(m1 >= 0.0);
    CHECK(m1 <= 1.0);
    std::vector<Vec2> more = ps;
    more.push_back({rng.uniform(-0.2, 1.0), rng.uniform(-0.2, 1.0)});
    CHECK(coverage_rate(region, more, 0.08) >= m1);
  }
}

TEST_CASE("occupancy is invariant under robot relabeling except occupant ids") {
  Rng rng(7);
  const GridRegion region = load_region_text("####\n####\n####\n", 0.1);
  std::vector<Vec2> ps;
  for (int i = 0; i < 5; ++i) {
    ps.push_back({rng.uniform(0.0, 0.4), rng.uniform(0.0, 0.3)});
  }
  std::vector<Vec2> reversed(ps.rbegin(), ps.rend());
  const OccupancyMap a = compute_occupancy(region, ps, 0.1);
  const OccupancyMap b = compute_occupancy(region, reversed, 0.1);
  for (std::size_t k = 0; k < region.n_cell(); ++k) {
    CHECK(a.occupied(k) == b.occupied(k));
  }
}
