#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabq/geometry.hpp"
#include "stabq/rng.hpp"
#include "stabq/special.hpp"

namespace stabq {

// Planar Voronoi cells. A cell is the intersection of the carrier window
// with the half-planes {x : ||x - y|| <= ||x - z||} over all other
// generators z. Generators farther than twice the current circumscribed
// radius cannot contribute an edge, which bounds the number of bisectors
// that need to be visited.

struct VoronoiCell {
  std::vector<Point<2>> vertices;  // counter-clockwise
  Point<2> generator{};
  bool clipped = false;  // touches the window boundary
};

struct CellStatistics {
  double volume = 0.0;
  double circumscribed_radius = 0.0;  // R_o, from the generator
  double inscribed_radius = 0.0;      // rho_o, from the generator
  double delta = 0.0;                 // (R_o - rho_o) / (R_o + rho_o)
  int hyperfaces = 0;
};

namespace detail {

inline void clip_halfplane(std::vector<Point<2>>& poly, const Point<2>& y, const Point<2>& z) {
  const double nx = z[0] - y[0], ny = z[1] - y[1];
  const double c = 0.5 * (nx * (y[0] + z[0]) + ny * (y[1] + z[1]));
  static thread_local std::vector<Point<2>> out;
  out.clear();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point<2>& p = poly[i];
    const Point<2>& q = poly[(i + 1) % n];
    const double ap = nx * p[0] + ny * p[1] - c;
    const double aq = nx * q[0] + ny * q[1] - c;
    if (ap <= 0.0) {
      out.push_back(p);
      if (aq > 0.0) {
        const double t = ap / (ap - aq);
        out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
      }
    } else if (aq <= 0.0) {
      const double t = ap / (ap - aq);
      out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
    }
  }
  poly = out;
}

inline double max_vertex_dist(const std::vector<Point<2>>& poly, const Point<2>& y) {
  double r = 0.0;
  for (const auto& v : poly) r = std::max(r, distance<2>(v, y));
  return r;
}

inline double point_segment_dist(const Point<2>& y, const Point<2>& a, const Point<2>& b) {
  const double ux = b[0] - a[0], uy = b[1] - a[1];
  const double len2 = ux * ux + uy * uy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((y[0] - a[0]) * ux + (y[1] - a[1]) * uy) / len2, 0.0, 1.0);
  const Point<2> f{a[0] + t * ux, a[1] + t * uy};
  return distance<2>(y, f);
}

}  // namespace detail

inline VoronoiCell voronoi_cell(const Point<2>& y, const PointConfiguration<2>& cfg,
                                const KdTree<2>& tree) {
  if (!cfg.window.contains(y)) throw std::invalid_argument("voronoi_cell: y outside window");
  VoronoiCell cell;
  cell.generator = y;
  const Window<2>& w = cfg.window;
  cell.vertices = {{w.lo[0], w.lo[1]}, {w.hi[0], w.lo[1]}, {w.hi[0], w.hi[1]}, {w.lo[0], w.hi[1]}};

  const std::size_t total = cfg.size();
  std::size_t processed = 0;
  int want = 16;
  double rmax = detail::max_vertex_dist(cell.vertices, y);
  bool done = total == 0;
  while (!done) {
    const auto nbs = tree.knn_upto(y, want);
    for (std::size_t i = processed; i < nbs.size(); ++i) {
      if (nbs[i].dist > 2.0 * rmax) {
        done = true;
        break;
      }
      detail::clip_halfplane(cell.vertices, y, tree.point(nbs[i].index));
      rmax = detail::max_vertex_dist(cell.vertices, y);
    }
    processed = nbs.size();
    if (!done) {
      if (nbs.size() < static_cast<std::size_t>(want)) break;  // every candidate visited
      want *= 2;
    }
  }

  constexpr double tol = 1e-9;
  for (const auto& v : cell.vertices) {
    for (int a = 0; a < 2; ++a) {
      if (std::abs(v[a] - w.lo[a]) <= tol || std::abs(v[a] - w.hi[a]) <= tol) cell.clipped = true;
    }
  }
  return cell;
}

inline VoronoiCell voronoi_cell(const Point<2>& y, const PointConfiguration<2>& cfg) {
  KdTree<2> tree(cfg);
  return voronoi_cell(y, cfg, tree);
}

inline double polygon_area(const std::vector<Point<2>>& poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point<2>& p = poly[i];
    const Point<2>& q = poly[(i + 1) % n];
    a += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * a;
}

inline CellStatistics cell_statistics(const VoronoiCell& cell) {
  CellStatistics st;
  st.hyperfaces = static_cast<int>(cell.vertices.size());
  st.volume = polygon_area(cell.vertices);
  st.circumscribed_radius = detail::max_vertex_dist(cell.vertices, cell.generator);
  double rho = std::numeric_limits<double>::infinity();
  const std::size_t n = cell.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    rho = std::min(rho, detail::point_segment_dist(cell.generator, cell.vertices[i],
                                                   cell.vertices[(i + 1) % n]));
  }
  st.inscribed_radius = n > 0 ? rho : 0.0;
  const double denom = st.circumscribed_radius + st.inscribed_radius;
  st.delta = denom > 0.0 ? (st.circumscribed_radius - st.inscribed_radius) / denom : 0.0;
  return st;
}

// Cell volume thresholded on the deviation from a ball:
// v_2(Z) * 1{delta(Z) >= eps}.
inline double voronoi_volume_deviation_score(const Point<2>& y, const PointConfiguration<2>& cfg,
                                             const KdTree<2>& tree, double eps) {
  const CellStatistics st = cell_statistics(voronoi_cell(y, cfg, tree));
  return st.delta >= eps ? st.volume : 0.0;
}

inline double voronoi_volume_deviation_score(const Point<2>& y, const PointConfiguration<2>& cfg,
                                             double eps) {
  KdTree<2> tree(cfg);
  return voronoi_volume_deviation_score(y, cfg, tree, eps);
}

struct VoronoiDeviationScore {
  double eps = 0.5;

  std::string name() const { return "voronoi-volume"; }
  double alpha_stab() const { return 2.0; }
  double c_stab() const { return 0.5 * unit_ball_volume(2); }

  double evaluate(const Point<2>& y, const PointConfiguration<2>& cfg,
                  const KdTree<2>& tree) const {
    return voronoi_volume_deviation_score(y, cfg, tree, eps);
  }

  double stabilization_radius(const Point<2>& y, const PointConfiguration<2>& cfg,
                              const KdTree<2>& tree) const {
    return 2.0 * cell_statistics(voronoi_cell(y, cfg, tree)).circumscribed_radius;
  }
};

// Union of the empty circumballs attached to the 0-faces of the cell: each
// cell vertex is equidistant from the generator and two neighbors, and the
// ball around it with that radius holds no other point.
struct DiskUnion {
  std::vector<Point<2>> centers;
  std::vector<double> radii;

  std::array<double, 4> bounding_box() const {  // {xlo, xhi, ylo, yhi}
    std::array<double, 4> b{std::numeric_limits<double>::infinity(),
                            -std::numeric_limits<double>::infinity(),
                            std::numeric_limits<double>::infinity(),
                            -std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < centers.size(); ++i) {
      b[0] = std::min(b[0], centers[i][0] - radii[i]);
      b[1] = std::max(b[1], centers[i][0] + radii[i]);
      b[2] = std::min(b[2], centers[i][1] - radii[i]);
      b[3] = std::max(b[3], centers[i][1] + radii[i]);
    }
    return b;
  }
};

// nullopt when the cell is window-clipped or some circumball leaves the
// window; such cells are boundary-affected and callers discard them.
inline std::optional<DiskUnion> fundamental_region(const Point<2>& y,
                                                   const PointConfiguration<2>& cfg,
                                                   const KdTree<2>& tree) {
  const VoronoiCell cell = voronoi_cell(y, cfg, tree);
  if (cell.clipped) return std::nullopt;
  DiskUnion du;
  du.centers = cell.vertices;
  du.radii.reserve(cell.vertices.size());
  for (const auto& v : cell.vertices) {
    const double r = distance<2>(v, y);
    for (int a = 0; a < 2; ++a) {
      if (v[a] - r < cfg.window.lo[a] || v[a] + r > cfg.window.hi[a]) return std::nullopt;
    }
    du.radii.push_back(r);
  }
  return du;
}

// Monte Carlo area of a union of disks over its bounding box.
inline double disk_union_area_mc(const DiskUnion& du, RngStream& rng, int proposals = 100000) {
  if (du.centers.empty()) return 0.0;
  const auto b = du.bounding_box();
  const double box_area = (b[1] - b[0]) * (b[3] - b[2]);
  std::size_t hits = 0;
  const std::size_t m = du.centers.size();
  for (int i = 0; i < proposals; ++i) {
    const double x = rng.uniform(b[0], b[1]);
    const double yy = rng.uniform(b[2], b[3]);
    for (std::size_t j = 0; j < m; ++j) {
      const double dx = x - du.centers[j][0];
      const double dy = yy - du.centers[j][1];
      if (dx * dx + dy * dy <= du.radii[j] * du.radii[j]) {
        ++hits;
        break;
      }
    }
  }
  return box_area * static_cast<double>(hits) / proposals;
}

// Fundamental-region volume as a score functional. Area estimation draws
// from a stream keyed by the seed and the evaluation point, so batch
// evaluation stays deterministic under any scheduling.
struct FundamentalRegionScore {
  std::uint64_t seed = 0;
  int proposals = 100000;

  std::string name() const { return "voronoi-fundamental"; }
  double alpha_stab() const { return 2.0; }
  double c_stab() const { return 0.5 * unit_ball_volume(2); }

  std::optional<double> evaluate(const Point<2>& y, const PointConfiguration<2>& cfg,
                                 const KdTree<2>& tree) const {
    const auto du = fundamental_region(y, cfg, tree);
    if (!du) return std::nullopt;
    RngStream rng{seed, std::bit_cast<std::uint64_t>(y[0]), std::bit_cast<std::uint64_t>(y[1]),
                  0xF4ull};
    return disk_union_area_mc(*du, rng, proposals);
  }

  double stabilization_radius(const Point<2>& y, const PointConfiguration<2>& cfg,
                              const KdTree<2>& tree) const {
    return 2.0 * cell_statistics(voronoi_cell(y, cfg, tree)).circumscribed_radius;
  }
};

inline double fundamental_region_score(const Point<2>& y, const PointConfiguration<2>& cfg,
                                       RngStream& rng, int proposals = 100000) {
  KdTree<2> tree(cfg);
  const auto du = fundamental_region(y, cfg, tree);
  if (!du)
    throw std::invalid_argument("fundamental_region_score: boundary-affected cell");
  return disk_union_area_mc(*du, rng, proposals);
}

}  // namespace stabq
