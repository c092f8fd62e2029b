#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

#include "stabq/special.hpp"

namespace stabq {

// Closed-form laws for nearest-neighbor distances on a unit-intensity
// Poisson process. Throughout, w_d denotes the unit-ball volume and the
// query point sits at the origin with the process conditioned to contain it.

// P(distance to the kth-nearest neighbor <= s): the probability that the
// ball B(0,s) holds at least k points, i.e. the regularized lower incomplete
// gamma P(k, w_d s^d).
inline double knn_kth_cdf(double s, int k, int d) {
  if (k < 1 || d < 1) throw std::invalid_argument("knn_kth_cdf: bad parameters");
  if (s <= 0.0) return 0.0;
  return gamma_p(static_cast<double>(k), unit_ball_volume(d) * std::pow(s, d));
}

// Density g(s) = (w_d s^d)^{k-1} / (k-1)! * w_d d s^{d-1} e^{-w_d s^d}.
inline double knn_kth_pdf(double s, int k, int d) {
  if (k < 1 || d < 1) throw std::invalid_argument("knn_kth_pdf: bad parameters");
  if (s <= 0.0) return 0.0;
  const double w = unit_ball_volume(d);
  const double wsd = w * std::pow(s, d);
  return std::exp((k - 1) * std::log(wsd) - std::lgamma(static_cast<double>(k))) * w * d *
         std::pow(s, d - 1) * std::exp(-wsd);
}

// g'(s), differentiating g(s) = A s^{dk-1} e^{-w s^d} with A = d w^k / (k-1)!:
// g'(s) = A s^{dk-2} e^{-w s^d} ((dk - 1) - d w s^d).
inline double knn_kth_pdf_deriv(double s, int k, int d) {
  if (k < 1 || d < 1) throw std::invalid_argument("knn_kth_pdf_deriv: bad parameters");
  if (s <= 0.0) return 0.0;
  const double w = unit_ball_volume(d);
  const double a = d * std::exp(k * std::log(w) - std::lgamma(static_cast<double>(k)));
  const double sd = std::pow(s, d);
  return a * std::pow(s, d * k - 2) * std::exp(-w * sd) *
         ((static_cast<double>(d) * k - 1.0) - static_cast<double>(d) * w * sd);
}

// Joint density of the ordered neighbor distances (||V_1||,...,||V_k||):
// e^{-w_d s_k^d} (w_d d)^k (prod s_i)^{d-1} on {0 < s_1 < ... < s_k}.
inline double knn_joint_pdf(std::span<const double> s, int d) {
  if (s.empty()) throw std::invalid_argument("knn_joint_pdf: empty input");
  const int k = static_cast<int>(s.size());
  double prev = 0.0;
  for (double v : s) {
    if (!(v > prev)) return 0.0;
    prev = v;
  }
  const double w = unit_ball_volume(d);
  double prod = 1.0;
  for (double v : s) prod *= std::pow(v, d - 1);
  return std::exp(-w * std::pow(s[k - 1], d)) * std::pow(w * d, k) * prod;
}

// Conditional density g_j of the kth-nearest-neighbor distance when exactly
// j uniform points occupy B(0,R) and the Poisson process fills the
// complement. Beta-type on (0,R) for j >= k, shifted-gamma type on (R,inf)
// for j < k.
inline double knn_conditional_pdf(double s, int j, int k, int d, double R) {
  if (j < 0 || k < 1 || d < 1 || !(R > 0.0))
    throw std::invalid_argument("knn_conditional_pdf: bad parameters");
  if (j >= k) {
    if (s <= 0.0 || s >= R) return 0.0;
    const double u = std::pow(s / R, d);
    const double comb = std::exp(std::lgamma(j + 1.0) - std::lgamma(static_cast<double>(k)) -
                                 std::lgamma(j - k + 1.0));
    return comb * std::pow(u, k - 1) * (d * std::pow(s, d - 1) / std::pow(R, d)) *
           std::pow(1.0 - u, j - k);
  }
  if (s <= R) return 0.0;
  const double w = unit_ball_volume(d);
  const double v = w * (std::pow(s, d) - std::pow(R, d));
  const int a = k - 1 - j;
  return std::exp(a * std::log(v) - std::lgamma(a + 1.0)) * w * d * std::pow(s, d - 1) *
         std::exp(-v);
}

// CDF companion of g_j (binomial tail on (0,R), incomplete gamma beyond R).
inline double knn_conditional_cdf(double s, int j, int k, int d, double R) {
  if (j < 0 || k < 1 || d < 1 || !(R > 0.0))
    throw std::invalid_argument("knn_conditional_cdf: bad parameters");
  if (j >= k) {
    if (s <= 0.0) return 0.0;
    if (s >= R) return 1.0;
    return binomial_tail_geq(j, std::pow(s / R, d), k);
  }
  if (s <= R) return 0.0;
  const double w = unit_ball_volume(d);
  return gamma_p(static_cast<double>(k - j), w * (std::pow(s, d) - std::pow(R, d)));
}

namespace detail {

// Series over Poisson weights p_j = e^{-lambda} lambda^j / j!, truncated when
// the weight drops below cutoff past the mode.
template <typename TermFn>
inline double poisson_mixture(double lambda, double cutoff, TermFn&& term) {
  double sum = 0.0;
  for (int j = 0;; ++j) {
    const double pj = poisson_pmf(static_cast<std::uint64_t>(j), lambda);
    if (pj < cutoff && j > lambda) break;
    if (pj > 0.0) sum += pj * term(j);
    if (j > 4096) break;
  }
  return sum;
}

}  // namespace detail

inline constexpr double kMixtureWeightCutoff = 1e-12;

// Density of the kth-nearest-neighbor distance with one extra uniform point
// on B(0,R): the Poisson mixture over g_{j+1}.
inline double knn_extended_pdf(double s, int k, int d, double R,
                               double cutoff = kMixtureWeightCutoff) {
  if (!(R > 0.0)) throw std::invalid_argument("knn_extended_pdf: R must be positive");
  const double lambda = unit_ball_volume(d) * std::pow(R, d);
  return detail::poisson_mixture(lambda, cutoff,
                                 [&](int j) { return knn_conditional_pdf(s, j + 1, k, d, R); });
}

inline double knn_extended_cdf(double s, int k, int d, double R,
                               double cutoff = kMixtureWeightCutoff) {
  if (!(R > 0.0)) throw std::invalid_argument("knn_extended_cdf: R must be positive");
  const double lambda = unit_ball_volume(d) * std::pow(R, d);
  return detail::poisson_mixture(lambda, cutoff,
                                 [&](int j) { return knn_conditional_cdf(s, j + 1, k, d, R); });
}

// Mixture identity route to the unconditional density: sum_j p_j g_j. Agrees
// with knn_kth_pdf; kept as an independent evaluation path for tests.
inline double knn_mixture_pdf(double s, int k, int d, double R,
                              double cutoff = kMixtureWeightCutoff) {
  if (!(R > 0.0)) throw std::invalid_argument("knn_mixture_pdf: R must be positive");
  const double lambda = unit_ball_volume(d) * std::pow(R, d);
  return detail::poisson_mixture(lambda, cutoff,
                                 [&](int j) { return knn_conditional_pdf(s, j, k, d, R); });
}

// A score law exposed through its distributional capabilities.
struct OracleLaw {
  std::string family;
  std::function<double(double)> cdf;
  std::function<double(double)> pdf;
  std::function<double(double)> pdf_deriv;
  double support_lo = 0.0;

  // Quantile by bisection: bracket grown geometrically from [support_lo,
  // support_lo + 1], then bisected to absolute tolerance 1e-10.
  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile: p must lie in (0,1)");
    double lo = support_lo;
    double span = 1.0;
    double hi = lo + span;
    int guard = 0;
    while (cdf(hi) < p) {
      span *= 2.0;
      hi = lo + span;
      if (++guard > 200) throw std::runtime_error("quantile: bracket did not close");
    }
    while (hi - lo > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      if (cdf(mid) >= p)
        hi = mid;
      else
        lo = mid;
    }
    return 0.5 * (lo + hi);
  }
};

inline OracleLaw make_knn_kth_law(int k, int d) {
  if (k < 1 || d < 2) throw std::invalid_argument("make_knn_kth_law: bad parameters");
  OracleLaw law;
  law.family = "knn-kth";
  law.cdf = [k, d](double s) { return knn_kth_cdf(s, k, d); };
  law.pdf = [k, d](double s) { return knn_kth_pdf(s, k, d); };
  law.pdf_deriv = [k, d](double s) { return knn_kth_pdf_deriv(s, k, d); };
  return law;
}

inline OracleLaw make_knn_extended_law(int k, int d, double R) {
  if (k < 1 || d < 2 || !(R > 0.0))
    throw std::invalid_argument("make_knn_extended_law: bad parameters");
  OracleLaw law;
  law.family = "knn-extended";
  law.cdf = [k, d, R](double s) { return knn_extended_cdf(s, k, d, R); };
  law.pdf = [k, d, R](double s) { return knn_extended_pdf(s, k, d, R); };
  law.pdf_deriv = [k, d, R](double s) {
    const double h = 1e-6 * (1.0 + std::abs(s));
    return (knn_extended_pdf(s + h, k, d, R) - knn_extended_pdf(s - h, k, d, R)) / (2.0 * h);
  };
  return law;
}

// Gamma(m, 1) law of the fundamental-region volume conditional on the cell
// having m hyperfaces.
inline double gamma_shape_cdf(double s, int m) {
  if (m < 1) throw std::invalid_argument("gamma_shape_cdf: m must be >= 1");
  if (s <= 0.0) return 0.0;
  return gamma_p(static_cast<double>(m), s);
}

inline double gamma_shape_pdf(double s, int m) {
  if (m < 1) throw std::invalid_argument("gamma_shape_pdf: m must be >= 1");
  if (s <= 0.0) return 0.0;
  return std::exp((m - 1) * std::log(s) - s - std::lgamma(static_cast<double>(m)));
}

}  // namespace stabq
