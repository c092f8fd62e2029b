#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "stabq/special.hpp"

namespace stabq {

struct SampleMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

inline SampleMoments sample_moments(std::span<const double> xs) {
  SampleMoments m;
  m.count = xs.size();
  if (xs.empty()) return m;
  const double n = static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m.variance = xs.size() > 1 ? m2 / (n - 1.0) : 0.0;
  if (m2 > 0.0) {
    m.skewness = (m3 / n) / std::pow(m2 / n, 1.5);
    m.excess_kurtosis = (m4 / n) / ((m2 / n) * (m2 / n)) - 3.0;
  }
  return m;
}

// Kolmogorov-Smirnov distance of a sample against a reference CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  return d;
}

// Sup distance between two CDFs, evaluated on a fine grid of [lo, hi].
inline double cdf_sup_distance(const std::function<double(double)>& f,
                               const std::function<double(double)>& g, double lo, double hi,
                               int grid = 4096) {
  double d = 0.0;
  for (int i = 0; i <= grid; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / grid;
    d = std::max(d, std::abs(f(x) - g(x)));
  }
  return d;
}

struct AndersonDarlingResult {
  double a2 = 0.0;        // raw statistic
  double a2_star = 0.0;   // small-sample adjusted (mean/variance estimated)
  double p_value = 0.0;
};

// Anderson-Darling test of composite normality (mean and variance estimated
// from the sample). Adjustment and p-value approximation follow D'Agostino &
// Stephens, "Goodness-of-Fit Techniques", Table 4.9.
inline AndersonDarlingResult anderson_darling_normality(std::vector<double> xs) {
  if (xs.size() < 8) throw std::invalid_argument("anderson_darling: need at least 8 samples");
  const SampleMoments m = sample_moments(xs);
  if (!(m.variance > 0.0))
    throw std::invalid_argument("anderson_darling: degenerate sample (zero variance)");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  const double sd = std::sqrt(m.variance);
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double wi = normal_cdf((xs[i] - m.mean) / sd);
    const double wj = normal_cdf((xs[xs.size() - 1 - i] - m.mean) / sd);
    const double li = std::log(std::max(wi, 1e-300));
    const double lj = std::log(std::max(1.0 - wj, 1e-300));
    acc += (2.0 * static_cast<double>(i) + 1.0) * (li + lj);
  }
  AndersonDarlingResult r;
  r.a2 = -n - acc / n;
  r.a2_star = r.a2 * (1.0 + 0.75 / n + 2.25 / (n * n));
  const double a = r.a2_star;
  if (a >= 0.6)
    r.p_value = std::exp(1.2937 - 5.709 * a + 0.0186 * a * a);
  else if (a >= 0.34)
    r.p_value = std::exp(0.9177 - 4.279 * a - 1.38 * a * a);
  else if (a > 0.2)
    r.p_value = 1.0 - std::exp(-8.318 + 42.796 * a - 59.938 * a * a);
  else
    r.p_value = 1.0 - std::exp(-13.436 + 101.14 * a - 223.73 * a * a);
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

// Ordinary least squares fit of log y against log x.
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double r2 = 0.0;
};

inline RateFit fit_loglog(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw std::invalid_argument("fit_loglog: need >= 3 matching points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw std::invalid_argument("fit_loglog: inputs must be positive");
    if (i > 0 && !(xs[i] > xs[i - 1]))
      throw std::invalid_argument("fit_loglog: xs must be strictly increasing");
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += std::log(xs[i]);
    sy += std::log(ys[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    const double dy = std::log(ys[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double pred = f.intercept + f.slope * std::log(xs[i]);
    const double res = std::log(ys[i]) - pred;
    ss_res += res * res;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  f.stderr_slope = xs.size() > 2 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
  return f;
}

// Plain least squares on given abscissae (used by the stabilization tail fit,
// where x is already r^alpha).
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

inline LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_line: need >= 2 matching points");
  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double res = ys[i] - (f.intercept + f.slope * xs[i]);
    ss_res += res * res;
  }
  f.stderr_slope = xs.size() > 2 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
  return f;
}

namespace detail {

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <typename F>
double integrate(const F& f, double a, double b, double tol = 1e-8) {
  if (!(b >= a)) throw std::invalid_argument("integrate: need b >= a");
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace stabq
