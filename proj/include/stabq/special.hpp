#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace stabq {

// Volume of the d-dimensional Euclidean unit ball, pi^{d/2} / Gamma(d/2 + 1).
inline double unit_ball_volume(int d) {
  if (d < 1) throw std::invalid_argument("unit_ball_volume: d must be >= 1");
  constexpr double pi = 3.14159265358979323846;
  return std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

namespace detail {

// Lower regularized incomplete gamma by power series, valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ai = a;
  for (int i = 0; i < 500; ++i) {
    ai += 1.0;
    term *= x / ai;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma by modified Lentz continued fraction,
// valid for x >= a + 1.
inline double gamma_q_contfrac(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("gamma_p: a must be positive");
  if (x < 0.0) throw std::invalid_argument("gamma_p: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_contfrac(a, x);
}

inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("gamma_q: a must be positive");
  if (x < 0.0) throw std::invalid_argument("gamma_q: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_contfrac(a, x);
}

inline double poisson_pmf(std::uint64_t k, double lambda) {
  if (lambda <= 0.0) return k == 0 ? 1.0 : 0.0;
  const double kk = static_cast<double>(k);
  return std::exp(kk * std::log(lambda) - lambda - std::lgamma(kk + 1.0));
}

// P(Z <= k) for Z ~ Poisson(lambda); equals Q(k+1, lambda).
inline double poisson_cdf(std::uint64_t k, double lambda) {
  if (lambda <= 0.0) return 1.0;
  return gamma_q(static_cast<double>(k) + 1.0, lambda);
}

// Two-sided Poisson concentration: P(|Z - lambda| >= t) <= 2 exp(-t^2 / (2(lambda + t))).
inline double poisson_tail_bound(double lambda, double t) {
  if (!(lambda > 0.0) || !(t > 0.0))
    throw std::invalid_argument("poisson_tail_bound: lambda and t must be positive");
  return 2.0 * std::exp(-t * t / (2.0 * (lambda + t)));
}

// P(Bin(n, p) >= k); exact finite sum, adequate for the small n used here.
inline double binomial_tail_geq(int n, double p, int k) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double lp = std::log(p), lq = std::log1p(-p);
  double sum = 0.0;
  for (int i = k; i <= n; ++i) {
    sum += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                    i * lp + (n - i) * lq);
  }
  return std::min(1.0, sum);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

}  // namespace stabq
