#include "lamarl/region.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

namespace lamarl {

namespace {

struct CellGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<char> marked;  // row-major, row 0 at the top

  bool at(std::size_t r, std::size_t c) const { return marked[r * cols + c] != 0; }
};

// Checks 4-connectivity of the marked cells. On failure reports the sizes of
// the first two components found.
void require_connected(const CellGrid& g, std::size_t n_marked) {
  if (n_marked == 0) throw Error("region is empty: no marked cells");

  std::vector<char> seen(g.rows * g.cols, 0);
  std::size_t first_size = 0;
  std::size_t start = 0;
  while (start < g.marked.size() && !g.marked[start]) ++start;

  std::vector<std::size_t> stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    const std::size_t idx = stack.back();
    stack.pop_back();
    ++first_size;
    const std::size_t r = idx / g.cols, c = idx % g.cols;
    const auto visit = [&](std::size_t rr, std::size_t cc) {
      const std::size_t j = rr * g.cols + cc;
      if (g.marked[j] && !seen[j]) {
        seen[j] = 1;
        stack.push_back(j);
      }
    };
    if (r > 0) visit(r - 1, c);
    if (r + 1 < g.rows) visit(r + 1, c);
    if (c > 0) visit(r, c - 1);
    if (c + 1 < g.cols) visit(r, c + 1);
  }

  if (first_size != n_marked) {
    throw Error("region is not 4-connected: component sizes " +
                std::to_string(first_size) + " and " +
                std::to_string(n_marked - first_size));
  }
}

GridRegion grid_to_region(const CellGrid& g, double scale) {
  if (scale <= 0.0) throw Error("cell scale must be positive");

  std::size_t n_marked = 0;
  for (char m : g.marked) n_marked += (m != 0);
  require_connected(g, n_marked);

  // Tight index bounds of the marked cells.
  std::size_t rmin = g.rows, rmax = 0, cmin = g.cols, cmax = 0;
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      if (!g.at(r, c)) continue;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
    }
  }

  GridRegion region;
  region.l_cell = scale;
  region.cell_centers.reserve(n_marked);
  // Text row 0 is the top of the shape; y grows upward. Normalized so the
  // lower-left corner of the marked bounding box is the origin.
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      if (!g.at(r, c)) continue;
      const double x = (static_cast<double>(c - cmin) + 0.5) * scale;
      const double y = (static_cast<double>(rmax - r) + 0.5) * scale;
      region.cell_centers.push_back({x, y});
    }
  }
  region.bounds.min = {0.0, 0.0};
  region.bounds.max = {(static_cast<double>(cmax - cmin) + 1.0) * scale,
                       (static_cast<double>(rmax - rmin) + 1.0) * scale};
  return region;
}

}  // namespace

bool GridRegion::contains(const Vec2& p) const {
  if (cell_centers.empty()) return false;
  const Vec2 c = cell_centers[nearest_cell(p)];
  const double h = l_cell / 2.0;
  return std::abs(p.x - c.x) <= h && std::abs(p.y - c.y) <= h;
}

std::size_t GridRegion::nearest_cell(const Vec2& p) const {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cell_centers.size(); ++k) {
    const double d2 = (cell_centers[k] - p).squared_norm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  return best;
}

std::size_t OccupancyMap::occupied_count() const {
  std::size_t n = 0;
  for (int id : occupant) n += (id >= 0);
  return n;
}

GridRegion load_region_text(const std::string& text, double scale) {
  CellGrid g;
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw Error("region is empty: no grid lines");

  g.rows = lines.size();
  g.cols = lines[0].size();
  g.marked.assign(g.rows * g.cols, 0);
  for (std::size_t r = 0; r < g.rows; ++r) {
    if (lines[r].size() != g.cols) {
      throw Error("grid is not rectangular: line " + std::to_string(r + 1) +
                  " has " + std::to_string(lines[r].size()) +
                  " columns, expected " + std::to_string(g.cols));
    }
    for (std::size_t c = 0; c < g.cols; ++c) {
      const char ch = lines[r][c];
      if (ch == '#') {
        g.marked[r * g.cols + c] = 1;
      } else if (ch != '.') {
        throw Error(std::string("unexpected character '") + ch +
                    "' in grid (expected '#' or '.')");
      }
    }
  }
  return grid_to_region(g, scale);
}

GridRegion load_region_pgm(const std::string& bytes, double scale) {
  std::istringstream in(bytes, std::ios::binary);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") {
    throw Error("unsupported raster format (expected PGM P2/P5)");
  }

  const auto next_token = [&]() -> long {
    // Skips whitespace and '#' comment lines.
    while (true) {
      int ch = in.peek();
      if (ch == EOF) throw Error("truncated PGM header");
      if (std::isspace(ch)) {
        in.get();
      } else if (ch == '#') {
        std::string comment;
        std::getline(in, comment);
      } else {
        break;
      }
    }
    long v = 0;
    in >> v;
    if (!in) throw Error("malformed PGM header");
    return v;
  };

  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw Error("unsupported PGM dimensions or maxval");
  }

  CellGrid g;
  g.rows = static_cast<std::size_t>(h);
  g.cols = static_cast<std::size_t>(w);
  g.marked.assign(g.rows * g.cols, 0);

  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    for (std::size_t i = 0; i < g.marked.size(); ++i) {
      const int v = in.get();
      if (v == EOF) throw Error("truncated PGM pixel data");
      g.marked[i] = (v > 127);
    }
  } else {
    for (std::size_t i = 0; i < g.marked.size(); ++i) {
      long v = 0;
      in >> v;
      if (!in) throw Error("truncated PGM pixel data");
      g.marked[i] = (v > 127);
    }
  }
  return grid_to_region(g, scale);
}

GridRegion load_region_file(const std::string& path, double scale) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open region file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.rfind("P2", 0) == 0 || bytes.rfind("P5", 0) == 0) {
    return load_region_pgm(bytes, scale);
  }
  return load_region_text(bytes, scale);
}

OccupancyMap compute_occupancy(const GridRegion& region,
                               const std::vector<Vec2>& positions,
                               double r_avoid) {
  if (r_avoid <= 0.0) throw Error("r_avoid must be positive");
  OccupancyMap map;
  map.occupant.assign(region.n_cell(), -1);
  const double r2 = r_avoid * r_avoid;
  for (std::size_t k = 0; k < region.n_cell(); ++k) {
    double best_d2 = std::numeric_limits<double>::infinity();
    int best_id = -1;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const double d2 = (positions[i] - region.cell_centers[k]).squared_norm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best_id = static_cast<int>(i);
      }
    }
    if (best_id >= 0 && best_d2 < r2) map.occupant[k] = best_id;
  }
  return map;
}

double coverage_rate(const GridRegion& region,
                     const std::vector<Vec2>& positions, double r_avoid) {
  if (region.n_cell() == 0) throw Error("coverage over an empty region");
  const OccupancyMap map = compute_occupancy(region, positions, r_avoid);
  return static_cast<double>(map.occupied_count()) /
         static_cast<double>(region.n_cell());
}

std::vector<std::size_t> voronoi_counts(const GridRegion& region,
                                        const std::vector<Vec2>& positions) {
  if (positions.empty()) throw Error("uniformity requires at least one robot");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      if (positions[i] == positions[j]) {
        throw Error("coincident robot positions at ids " + std::to_string(i) +
                    " and " + std::to_string(j) +
                    ": Voronoi assignment undefined");
      }
    }
  }
  std::vector<std::size_t> counts(positions.size(), 0);
  for (const Vec2& c : region.cell_centers) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const double d2 = (positions[i] - c).squared_norm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    ++counts[best];
  }
  return counts;
}

double uniformity(const GridRegion& region,
                  const std::vector<Vec2>& positions) {
  const std::vector<std::size_t> counts = voronoi_counts(region, positions);
  const double n = static_cast<double>(counts.size());
  double mean = 0.0;
  for (std::size_t c : counts) mean += static_cast<double>(c);
  mean /= n;
  double var = 0.0;
  for (std::size_t c : counts) {
    const double d = static_cast<double>(c) - mean;
    var += d * d;
  }
  return var / n;
}

bool capacity_check(std::size_t n_robot, double r_avoid,
                    const GridRegion& region) {
  const double need = 4.0 * static_cast<double>(n_robot) * r_avoid * r_avoid;
  const double have =
      static_cast<double>(region.n_cell()) * region.l_cell * region.l_cell;
  return need <= have;
}

}  // namespace lamarl
