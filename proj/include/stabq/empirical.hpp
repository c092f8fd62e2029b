#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "stabq/geometry.hpp"
#include "stabq/oracles.hpp"
#include "stabq/scores.hpp"

namespace stabq {

// Trimming radius r_n = (c* log n)^{1/alpha_stab}.
inline double trim_radius(double n, double c_star, double alpha_stab) {
  if (!(n >= 2.0)) throw std::invalid_argument("trim_radius: n must be >= 2");
  if (!(c_star > 0.0)) throw std::invalid_argument("trim_radius: c_star must be positive");
  if (!(alpha_stab > 0.0)) throw std::invalid_argument("trim_radius: alpha_stab must be positive");
  return std::pow(c_star * std::log(n), 1.0 / alpha_stab);
}

// Boundary-trimmed empirical distribution function: scores xi(y, P_n) of the
// full outer configuration, indexed only over points of the inner window.
struct EmpiricalCdf {
  std::vector<double> values;     // sorted, one per scored inner point
  std::size_t inner_count = 0;    // points of the inner window
  std::size_t outer_count = 0;    // points of the outer window
  std::size_t unstabilized = 0;   // inner points whose score was undefined
  double r_used = 0.0;
  double outer_volume = 0.0;
  double inner_volume = 0.0;

  std::size_t size() const { return values.size(); }

  // F_hat(x); identically 0 on the empty configuration.
  double value(double x) const {
    if (values.empty()) return 0.0;
    const auto it = std::upper_bound(values.begin(), values.end(), x);
    return static_cast<double>(it - values.begin()) / static_cast<double>(values.size());
  }
};

template <int D, typename S>
  requires ScoreFunctional<S, D>
inline EmpiricalCdf build_ecdf(const PointConfiguration<D>& outer, const S& score, double r) {
  const Window<D> inner = shrink_window(outer.window, r);
  const KdTree<D> tree(outer);
  EmpiricalCdf ecdf;
  ecdf.r_used = r;
  ecdf.outer_count = outer.size();
  ecdf.outer_volume = outer.window.volume();
  ecdf.inner_volume = inner.volume();
  ecdf.values.reserve(outer.size());
  for (const auto& y : outer.points) {
    if (!inner.contains(y)) continue;
    ++ecdf.inner_count;
    if constexpr (std::is_same_v<decltype(score.evaluate(y, outer, tree)),
                                 std::optional<double>>) {
      const auto v = score.evaluate(y, outer, tree);
      if (v)
        ecdf.values.push_back(*v);
      else
        ++ecdf.unstabilized;
    } else {
      ecdf.values.push_back(score.evaluate(y, outer, tree));
    }
  }
  std::sort(ecdf.values.begin(), ecdf.values.end());
  return ecdf;
}

// Diagnostic variant built from truncated scores xi_r; undefined evaluations
// (ball too sparse) are counted and excluded.
template <int D, typename S>
  requires ScoreFunctional<S, D>
inline EmpiricalCdf build_ecdf_truncated(const PointConfiguration<D>& outer, const S& score,
                                         double r_trim, double r_trunc) {
  const Window<D> inner = shrink_window(outer.window, r_trim);
  const KdTree<D> tree(outer);
  EmpiricalCdf ecdf;
  ecdf.r_used = r_trim;
  ecdf.outer_count = outer.size();
  ecdf.outer_volume = outer.window.volume();
  ecdf.inner_volume = inner.volume();
  for (const auto& y : outer.points) {
    if (!inner.contains(y)) continue;
    ++ecdf.inner_count;
    const auto v = truncated_score<D>(score, y, outer, tree, r_trunc);
    if (v)
      ecdf.values.push_back(*v);
    else
      ++ecdf.unstabilized;
  }
  std::sort(ecdf.values.begin(), ecdf.values.end());
  return ecdf;
}

struct QuantileEstimate {
  double p = 0.0;
  double value = 0.0;
  std::size_t order_index = 0;  // 1-based rank ceil(p * M)
};

// psi_hat_{p,n} = inf{t : F_hat(t) >= p}, the ceil(p M)-th order statistic.
inline QuantileEstimate quantile(const EmpiricalCdf& ecdf, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile: p must lie in (0,1)");
  if (ecdf.values.empty()) throw std::invalid_argument("quantile: empty empirical CDF");
  const double m = static_cast<double>(ecdf.values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * m));
  rank = std::max<std::size_t>(1, std::min(rank, ecdf.values.size()));
  return QuantileEstimate{p, ecdf.values[rank - 1], rank};
}

// psi_hat_{p,n} - psi_p - (p - F_hat(psi_p)) / f(psi_p).
inline double bahadur_remainder(const EmpiricalCdf& ecdf, double p, double psi_p,
                                double f_at_psi) {
  if (!(f_at_psi > 0.0) || !std::isfinite(f_at_psi))
    throw std::invalid_argument("bahadur_remainder: need finite f(psi_p) > 0");
  const double psi_hat = quantile(ecdf, p).value;
  return psi_hat - psi_p - (p - ecdf.value(psi_p)) / f_at_psi;
}

// Oracle quantiles and densities precomputed on a p-grid.
struct QuantileGridOracle {
  std::vector<double> p;
  std::vector<double> psi;
  std::vector<double> f_at_psi;
};

inline QuantileGridOracle make_quantile_grid(const OracleLaw& law, double p0, double p1,
                                             double step = 1e-3) {
  if (!(p0 > 0.0 && p0 < p1 && p1 < 1.0))
    throw std::invalid_argument("make_quantile_grid: need 0 < p0 < p1 < 1");
  if (!(step > 0.0)) throw std::invalid_argument("make_quantile_grid: step must be positive");
  QuantileGridOracle g;
  const auto count = static_cast<std::size_t>(std::floor((p1 - p0) / step + 1e-12)) + 1;
  g.p.reserve(count + 1);
  for (std::size_t i = 0; i < count; ++i) g.p.push_back(p0 + static_cast<double>(i) * step);
  if (g.p.back() < p1) g.p.push_back(p1);
  for (double pv : g.p) {
    const double q = law.quantile(pv);
    const double f = law.pdf(q);
    if (!(f > 0.0)) throw std::invalid_argument("make_quantile_grid: oracle density vanishes");
    g.psi.push_back(q);
    g.f_at_psi.push_back(f);
  }
  return g;
}

struct SupRemainder {
  double sup_remainder = 0.0;
  double sup_raw_error = 0.0;  // sup_p |psi_hat_p - psi_p|
};

inline SupRemainder sup_remainder(const EmpiricalCdf& ecdf, const QuantileGridOracle& grid) {
  if (grid.p.empty()) throw std::invalid_argument("sup_remainder: empty grid");
  SupRemainder out;
  for (std::size_t i = 0; i < grid.p.size(); ++i) {
    const double raw = quantile(ecdf, grid.p[i]).value - grid.psi[i];
    const double rem = raw - (grid.p[i] - ecdf.value(grid.psi[i])) / grid.f_at_psi[i];
    out.sup_remainder = std::max(out.sup_remainder, std::abs(rem));
    out.sup_raw_error = std::max(out.sup_raw_error, std::abs(raw));
  }
  return out;
}

namespace detail {

inline void check_trim_range(const EmpiricalCdf& ecdf, double p0, double p1, std::size_t& alpha,
                             std::size_t& beta) {
  if (!(p0 > 0.0 && p0 < p1 && p1 < 1.0))
    throw std::invalid_argument("means: need 0 < p0 < p1 < 1");
  const double m = static_cast<double>(ecdf.values.size());
  alpha = static_cast<std::size_t>(std::floor(m * p0));
  beta = static_cast<std::size_t>(std::floor(m * p1));
  if (!(beta > alpha) || beta + 1 > ecdf.values.size())
    throw std::invalid_argument("means: sample too small for the requested trim range");
}

}  // namespace detail

// Mean of the order statistics with ranks alpha_n+1 .. beta_n, where
// alpha_n = floor(M p0), beta_n = floor(M p1).
inline double trimmed_mean(const EmpiricalCdf& ecdf, double p0, double p1) {
  std::size_t alpha = 0, beta = 0;
  detail::check_trim_range(ecdf, p0, p1, alpha, beta);
  double s = 0.0;
  for (std::size_t i = alpha + 1; i <= beta; ++i) s += ecdf.values[i - 1];
  return s / static_cast<double>(beta - alpha);
}

// Same trim range with the tails clamped to the cut order statistics.
inline double winsorized_mean(const EmpiricalCdf& ecdf, double p0, double p1) {
  std::size_t alpha = 0, beta = 0;
  detail::check_trim_range(ecdf, p0, p1, alpha, beta);
  const std::size_t m = ecdf.values.size();
  double s = 0.0;
  for (std::size_t i = alpha + 1; i <= beta; ++i) s += ecdf.values[i - 1];
  if (alpha > 0) s += static_cast<double>(alpha) * ecdf.values[alpha - 1];
  s += static_cast<double>(m - beta) * ecdf.values[beta];
  return s / static_cast<double>(m);
}

// Finite-dimensional thresholded score: Psi(y, P) = sum_i a_i (1{xi <= x_i} - F(x_i)).
struct FidiSpec {
  std::vector<double> thresholds;
  std::vector<double> weights;
  std::vector<double> f_values;  // F(x_i) under the oracle law

  void validate() const {
    if (thresholds.empty() || thresholds.size() != weights.size() ||
        thresholds.size() != f_values.size())
      throw std::invalid_argument("FidiSpec: thresholds, weights, f_values must match");
  }
};

// Difference of aggregate thresholded scores between two configurations over
// a common inner index window. Indicator counts are accumulated as integers
// so that the value is exactly reproducible across ladder rungs.
template <int D, typename S>
  requires ScoreFunctional<S, D>
inline double delta_between(const PointConfiguration<D>& base,
                            const PointConfiguration<D>& resampled, const Window<D>& inner,
                            const S& score, const FidiSpec& fidi) {
  fidi.validate();
  const std::size_t m = fidi.thresholds.size();
  std::vector<long long> counts_base(m, 0), counts_res(m, 0);
  long long inner_base = 0, inner_res = 0;

  const auto accumulate = [&](const PointConfiguration<D>& cfg, std::vector<long long>& counts,
                              long long& inner_n) {
    const KdTree<D> tree(cfg);
    for (const auto& y : cfg.points) {
      if (!inner.contains(y)) continue;
      ++inner_n;
      const double v = score.evaluate(y, cfg, tree);
      for (std::size_t i = 0; i < m; ++i) {
        if (v <= fidi.thresholds[i]) ++counts[i];
      }
    }
  };
  accumulate(base, counts_base, inner_base);
  accumulate(resampled, counts_res, inner_res);

  double delta = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    delta += fidi.weights[i] * (static_cast<double>(counts_base[i] - counts_res[i]) -
                                fidi.f_values[i] * static_cast<double>(inner_base - inner_res));
  }
  return delta;
}

// Delta(z, n): the coupling difference between the realization and its copy
// with the lattice cube Q_z independently resampled.
template <int D, typename S>
  requires ScoreFunctional<S, D>
inline double delta_coupling(const Window<D>& w, const SampleKey& key,
                             const std::array<long long, D>& z, const S& score, double r_trim,
                             const FidiSpec& fidi) {
  for (int a = 0; a < D; ++a) {
    if (static_cast<double>(z[a]) - 0.5 < w.lo[a] || static_cast<double>(z[a]) + 0.5 > w.hi[a])
      throw std::invalid_argument("delta_coupling: cube Q_z not inside the window");
  }
  const Window<D> inner = shrink_window(w, r_trim);
  const PointConfiguration<D> base = sample_poisson<D>(w, key);
  const PointConfiguration<D> resampled = sample_poisson_resampled_cell<D>(w, key, z);
  return delta_between<D>(base, resampled, inner, score, fidi);
}

// Finite-window add-one cost at threshold x: the thresholded-score change
// caused by inserting a point at the origin.
template <int D, typename S>
  requires ScoreFunctional<S, D>
inline double add_one_cost(const PointConfiguration<D>& cfg, const S& score, double x,
                           double f_of_x) {
  const Point<D> origin{};
  if (!cfg.window.contains(origin))
    throw std::invalid_argument("add_one_cost: window must contain the origin");
  std::vector<Point<D>> pts = cfg.points;
  pts.push_back(origin);
  const PointConfiguration<D> with_origin(std::move(pts), cfg.window);
  const KdTree<D> tree_base(cfg);
  const KdTree<D> tree_aug(with_origin);

  double total = (score.evaluate(origin, with_origin, tree_aug) <= x ? 1.0 : 0.0) - f_of_x;
  for (const auto& y : cfg.points) {
    const double with = score.evaluate(y, with_origin, tree_aug) <= x ? 1.0 : 0.0;
    const double without = score.evaluate(y, cfg, tree_base) <= x ? 1.0 : 0.0;
    total += with - without;
  }
  return total;
}

}  // namespace stabq
