#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabq/geometry.hpp"
#include "stabq/special.hpp"
#include "stabq/stats.hpp"

namespace stabq {

// Score functionals xi(y, P). Conventions shared by every family:
//   * evaluate(y, cfg, tree) computes xi(y, P u {y}); candidate points are
//     cfg minus exact coordinate matches of y, so it does not matter whether
//     y itself is stored in cfg.
//   * stabilization_radius(y, cfg, tree) returns an R satisfying the strong
//     stabilization property: changes to the configuration outside B(y, R)
//     cannot alter the score.
//   * alpha_stab() is the stabilization tail exponent (d for both families).

template <typename S, int D>
concept ScoreFunctional = requires(const S& s, const Point<D>& y, const PointConfiguration<D>& c,
                                   const KdTree<D>& t) {
  { s.evaluate(y, c, t) };
  { s.stabilization_radius(y, c, t) } -> std::convertible_to<double>;
  { s.name() } -> std::convertible_to<std::string>;
  { s.alpha_stab() } -> std::convertible_to<double>;
};

// Conservative default for the exponential stabilization constant in
// P(R >= r) <= C exp(-c r^d); the exact kNN tail decays like exp(-w_d r^d).
inline double default_c_stab(int d) { return 0.5 * unit_ball_volume(d); }

// Total distance to the k nearest neighbors.
template <int D>
struct KnnTotalScore {
  int k = 1;

  std::string name() const { return "knn-total"; }
  double alpha_stab() const { return D; }
  double c_stab() const { return default_c_stab(D); }

  double evaluate(const Point<D>& y, const PointConfiguration<D>&, const KdTree<D>& tree) const {
    const auto nbs = tree.knn(y, k);
    double s = 0.0;
    for (const auto& nb : nbs) s += nb.dist;
    return s;
  }

  // All k nearest neighbors lie inside B(y, d(y, V_k)); extra points outside
  // can only be farther, so the kth distance is a stabilization radius.
  double stabilization_radius(const Point<D>& y, const PointConfiguration<D>&,
                              const KdTree<D>& tree) const {
    return tree.knn(y, k).back().dist;
  }
};

// Distance to the kth-nearest neighbor.
template <int D>
struct KnnKthScore {
  int k = 1;

  std::string name() const { return "knn-kth"; }
  double alpha_stab() const { return D; }
  double c_stab() const { return default_c_stab(D); }

  double evaluate(const Point<D>& y, const PointConfiguration<D>&, const KdTree<D>& tree) const {
    return tree.knn(y, k).back().dist;
  }

  double stabilization_radius(const Point<D>& y, const PointConfiguration<D>&,
                              const KdTree<D>& tree) const {
    return tree.knn(y, k).back().dist;
  }
};

// Convenience entry points that build the index on demand.
template <int D>
inline double knn_total_score(const Point<D>& y, const PointConfiguration<D>& cfg, int k) {
  KdTree<D> tree(cfg);
  return KnnTotalScore<D>{k}.evaluate(y, cfg, tree);
}

template <int D>
inline double knn_kth_score(const Point<D>& y, const PointConfiguration<D>& cfg, int k) {
  KdTree<D> tree(cfg);
  return KnnKthScore<D>{k}.evaluate(y, cfg, tree);
}

template <int D>
inline double knn_stabilization_radius(const Point<D>& y, const PointConfiguration<D>& cfg,
                                       int k) {
  KdTree<D> tree(cfg);
  return KnnKthScore<D>{k}.stabilization_radius(y, cfg, tree);
}

namespace detail {

template <int D>
inline PointConfiguration<D> ball_restriction(const Point<D>& y, const PointConfiguration<D>& cfg,
                                              const KdTree<D>& tree, double r) {
  std::vector<int> ids;
  tree.radius(y, r, ids);
  std::sort(ids.begin(), ids.end());
  std::vector<Point<D>> pts;
  pts.reserve(ids.size());
  for (int i : ids) pts.push_back(cfg.points[i]);
  return PointConfiguration<D>(std::move(pts), cfg.window);
}

}  // namespace detail

// Truncated score xi_r(y, P) = xi(y, P n B(y, r)). When the ball holds too
// few points for the family (e.g. fewer than k neighbors) the score is
// undefined; we surface that as nullopt and callers count such events.
template <int D, typename S>
  requires ScoreFunctional<S, D>
inline std::optional<double> truncated_score(const S& score, const Point<D>& y,
                                             const PointConfiguration<D>& cfg,
                                             const KdTree<D>& tree, double r) {
  if (r < 0.0) throw std::invalid_argument("truncated_score: r must be >= 0");
  const PointConfiguration<D> sub = detail::ball_restriction<D>(y, cfg, tree, r);
  const KdTree<D> subtree(sub);
  try {
    return score.evaluate(y, sub, subtree);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

template <int D, typename S>
  requires ScoreFunctional<S, D>
inline std::optional<double> truncated_score(const S& score, const Point<D>& y,
                                             const PointConfiguration<D>& cfg, double r) {
  KdTree<D> tree(cfg);
  return truncated_score<D>(score, y, cfg, tree, r);
}

struct StabilizationTailFit {
  double c_hat = 0.0;
  double big_c_hat = 0.0;
  double stderr_slope = 0.0;
};

// Least-squares fit of log P(R >= r) against r^alpha on the empirical tail.
// Grid points are sample quantiles between levels 0.5 and ~0.99 (shallower
// when the sample is small, so each tail estimate keeps >= 20 exceedances).
inline StabilizationTailFit stabilization_tail_fit(std::vector<double> radii, double alpha_stab) {
  if (radii.size() < 100)
    throw std::invalid_argument("stabilization_tail_fit: need at least 100 samples");
  if (!(alpha_stab > 0.0))
    throw std::invalid_argument("stabilization_tail_fit: alpha_stab must be positive");
  std::sort(radii.begin(), radii.end());
  if (radii.front() == radii.back())
    throw std::invalid_argument("stabilization_tail_fit: degenerate (constant) samples");
  const double n = static_cast<double>(radii.size());
  const double q_hi = std::min(0.99, 1.0 - 20.0 / n);
  constexpr int kLevels = 40;
  std::vector<double> xs, ys;
  xs.reserve(kLevels);
  ys.reserve(kLevels);
  double last_x = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kLevels; ++i) {
    const double q = 0.5 + (q_hi - 0.5) * static_cast<double>(i) / (kLevels - 1);
    const auto idx = static_cast<std::size_t>(std::ceil(q * n)) - 1;
    const double x = std::pow(radii[idx], alpha_stab);
    if (x <= last_x) continue;  // collapse duplicate order statistics
    last_x = x;
    xs.push_back(x);
    ys.push_back(std::log1p(-q));
  }
  if (xs.size() < 3)
    throw std::invalid_argument("stabilization_tail_fit: degenerate sample spread");
  const LineFit f = fit_line(xs, ys);
  StabilizationTailFit out;
  out.c_hat = -f.slope;
  out.big_c_hat = std::exp(f.intercept);
  out.stderr_slope = f.stderr_slope;
  return out;
}

}  // namespace stabq
