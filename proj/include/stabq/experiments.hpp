#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stabq/empirical.hpp"
#include "stabq/format.hpp"
#include "stabq/geometry.hpp"
#include "stabq/oracles.hpp"
#include "stabq/parallel.hpp"
#include "stabq/scores.hpp"
#include "stabq/special.hpp"
#include "stabq/stats.hpp"

namespace stabq {

// Declarative description of one Monte Carlo experiment. Zero-valued
// stabilization constants mean "derive from the family and dimension":
// alpha_stab = d, c_stab = w_d / 2, c_star = 4 / c_stab.
struct ExperimentConfig {
  std::string family = "knn-kth";  // knn-kth | knn-total | voronoi-volume | voronoi-fundamental
  int dimension = 2;
  int k = 1;
  double epsilon = 0.5;     // Voronoi deviation threshold
  double extended_R = 0.0;  // 0 => sqrt(d)

  std::vector<double> n_ladder = {1000.0, 4000.0, 16000.0, 64000.0};
  int replicates = 100;
  std::uint64_t seed = 20260314;

  double c_stab = 0.0;
  double c_star = 0.0;
  double alpha_stab = 0.0;

  double p = 0.5;
  double p0 = 0.2;
  double p1 = 0.8;
  double p_grid_step = 1e-3;

  double ks_threshold = 0.03;
  double slope_lo = -0.95;
  double slope_hi = -0.55;
  double slope_separation = 0.1;
  double ad_alpha = 0.01;
  double var_ratio_lo = 0.8;
  double var_ratio_hi = 1.25;

  std::string out_dir = "out";
  bool svg = false;

  double alpha_eff() const { return alpha_stab > 0.0 ? alpha_stab : dimension; }
  double c_stab_eff() const { return c_stab > 0.0 ? c_stab : 0.5 * unit_ball_volume(dimension); }
  double c_star_eff() const { return c_star > 0.0 ? c_star : 4.0 / c_stab_eff(); }
  double extended_R_eff() const {
    return extended_R > 0.0 ? extended_R : std::sqrt(static_cast<double>(dimension));
  }

  void validate() const {
    if (family != "knn-kth" && family != "knn-total" && family != "voronoi-volume" &&
        family != "voronoi-fundamental")
      throw std::invalid_argument("config: unknown family '" + family + "'");
    if (dimension != 2 && dimension != 3)
      throw std::invalid_argument("config: dimension must be 2 or 3");
    if (family.rfind("voronoi", 0) == 0 && dimension != 2)
      throw std::invalid_argument("config: Voronoi families require dimension 2");
    if (k < 1) throw std::invalid_argument("config: k must be >= 1");
    if (!(epsilon >= 0.0 && epsilon < 1.0))
      throw std::invalid_argument("config: epsilon must lie in [0,1)");
    if (n_ladder.empty()) throw std::invalid_argument("config: n_ladder must be nonempty");
    double prev = 0.0;
    for (double n : n_ladder) {
      if (!(n >= 2.0)) throw std::invalid_argument("config: every ladder n must be >= 2");
      if (!(n > prev)) throw std::invalid_argument("config: n_ladder must be strictly increasing");
      prev = n;
    }
    if (replicates < 2) throw std::invalid_argument("config: replicates must be >= 2");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("config: p must lie in (0,1)");
    if (!(p0 > 0.0 && p0 < p1 && p1 < 1.0))
      throw std::invalid_argument("config: need 0 < p0 < p1 < 1");
    if (!(p_grid_step > 0.0)) throw std::invalid_argument("config: p_grid_step must be positive");
    if (c_stab < 0.0 || c_star < 0.0 || alpha_stab < 0.0)
      throw std::invalid_argument("config: stabilization constants must be >= 0");
    if (extended_R < 0.0) throw std::invalid_argument("config: extended_R must be >= 0");
  }
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Report {
  std::string experiment;
  std::vector<Table> tables;
  std::vector<std::pair<std::string, std::string>> summary;
  bool pass = true;

  void add(const std::string& key, const std::string& value) { summary.emplace_back(key, value); }
  void add(const std::string& key, double value) { summary.emplace_back(key, format_double(value)); }
  void add(const std::string& key, bool value) { summary.emplace_back(key, format_bool(value)); }
};

namespace detail {

inline void require_knn_kth_oracle(const ExperimentConfig& cfg, const char* op) {
  if (cfg.family != "knn-kth")
    throw std::invalid_argument(std::string(op) +
                                ": no closed-form oracle for family '" + cfg.family + "'");
}

template <int D>
inline EmpiricalCdf replicate_ecdf(const ExperimentConfig& cfg, double n,
                                   std::uint64_t replicate) {
  const Window<D> w = make_window<D>(n);
  const PointConfiguration<D> pts = sample_poisson<D>(w, SampleKey{cfg.seed, replicate});
  const double r = trim_radius(n, cfg.c_star_eff(), cfg.alpha_eff());
  if (cfg.family == "knn-total") return build_ecdf<D>(pts, KnnTotalScore<D>{cfg.k}, r);
  return build_ecdf<D>(pts, KnnKthScore<D>{cfg.k}, r);
}

template <typename Fn>
inline auto dispatch_dim(int d, Fn&& fn) {
  if (d == 2) return fn(std::integral_constant<int, 2>{});
  if (d == 3) return fn(std::integral_constant<int, 3>{});
  throw std::invalid_argument("dimension must be 2 or 3");
}

}  // namespace detail

// Empirical law of the scores against the closed-form CDF, one KS distance
// per (n, replicate).
inline Report run_density_check(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::require_knn_kth_oracle(cfg, "run_density_check");
  const OracleLaw law = make_knn_kth_law(cfg.k, cfg.dimension);

  Report rep;
  rep.experiment = "density-check";
  Table t{"density", {"n", "replicate", "inner_count", "ks"}, {}};
  double worst = 0.0;
  for (double n : cfg.n_ladder) {
    std::vector<double> ks(cfg.replicates, 0.0);
    std::vector<double> inner(cfg.replicates, 0.0);
    parallel_for(static_cast<std::size_t>(cfg.replicates), [&](std::size_t r) {
      const EmpiricalCdf e = detail::dispatch_dim(cfg.dimension, [&](auto dim) {
        return detail::replicate_ecdf<dim()>(cfg, n, r);
      });
      inner[r] = static_cast<double>(e.size());
      ks[r] = e.values.empty() ? 1.0 : ks_statistic(e.values, law.cdf);
    });
    for (int r = 0; r < cfg.replicates; ++r) {
      t.rows.push_back({n, static_cast<double>(r), inner[r], ks[r]});
      worst = std::max(worst, ks[r]);
    }
  }
  rep.tables.push_back(std::move(t));

  // Score sample of the first replicate at the largest n, for histogram
  // plots and downstream inspection.
  {
    const double n = cfg.n_ladder.back();
    const EmpiricalCdf e = detail::dispatch_dim(cfg.dimension, [&](auto dim) {
      return detail::replicate_ecdf<dim()>(cfg, n, 0);
    });
    Table ts{"density_scores", {"n", "replicate", "score"}, {}};
    for (double v : e.values) ts.rows.push_back({n, 0.0, v});
    rep.tables.push_back(std::move(ts));
  }

  rep.pass = worst < cfg.ks_threshold;
  rep.add("max_ks", worst);
  rep.add("ks_threshold", cfg.ks_threshold);
  rep.add("pass", rep.pass);
  return rep;
}

// Sup over the p-grid of the Bahadur remainder, per replicate, with log-log
// rate fits of the per-n means for the remainder and for the raw quantile
// error.
inline Report run_bahadur_rate(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::require_knn_kth_oracle(cfg, "run_bahadur_rate");
  if (cfg.n_ladder.size() < 4)
    throw std::invalid_argument("run_bahadur_rate: need an n-ladder with >= 4 rungs");
  const OracleLaw law = make_knn_kth_law(cfg.k, cfg.dimension);
  const QuantileGridOracle grid = make_quantile_grid(law, cfg.p0, cfg.p1, cfg.p_grid_step);
  const double psi = law.quantile(cfg.p);
  const double fpsi = law.pdf(psi);
  if (!(fpsi > 0.0)) throw std::invalid_argument("run_bahadur_rate: oracle density vanishes");

  Report rep;
  rep.experiment = "bahadur";
  Table tr{"bahadur", {"n", "replicate", "p", "remainder", "sup_remainder"}, {}};
  Table traw{"bahadur_raw", {"n", "replicate", "p", "raw_error", "sup_raw_error"}, {}};
  Table tmean{"bahadur_mean_sup", {"n", "mean_sup_remainder", "mean_sup_raw_error"}, {}};

  std::vector<double> mean_rem, mean_raw;
  for (double n : cfg.n_ladder) {
    std::vector<double> sup_rem(cfg.replicates), sup_raw(cfg.replicates), rem_p(cfg.replicates),
        raw_p(cfg.replicates);
    parallel_for(static_cast<std::size_t>(cfg.replicates), [&](std::size_t r) {
      const EmpiricalCdf e = detail::dispatch_dim(cfg.dimension, [&](auto dim) {
        return detail::replicate_ecdf<dim()>(cfg, n, r);
      });
      const SupRemainder s = sup_remainder(e, grid);
      sup_rem[r] = s.sup_remainder;
      sup_raw[r] = s.sup_raw_error;
      rem_p[r] = bahadur_remainder(e, cfg.p, psi, fpsi);
      raw_p[r] = quantile(e, cfg.p).value - psi;
    });
    double mr = 0.0, mw = 0.0;
    for (int r = 0; r < cfg.replicates; ++r) {
      tr.rows.push_back({n, static_cast<double>(r), cfg.p, rem_p[r], sup_rem[r]});
      traw.rows.push_back({n, static_cast<double>(r), cfg.p, raw_p[r], sup_raw[r]});
      mr += sup_rem[r];
      mw += sup_raw[r];
    }
    mr /= cfg.replicates;
    mw /= cfg.replicates;
    tmean.rows.push_back({n, mr, mw});
    mean_rem.push_back(mr);
    mean_raw.push_back(mw);
  }

  const RateFit fit_rem = fit_loglog(cfg.n_ladder, mean_rem);
  const RateFit fit_raw = fit_loglog(cfg.n_ladder, mean_raw);
  Table tfit{"bahadur_fit", {"series", "slope", "intercept", "stderr_slope", "r2"}, {}};
  tfit.rows.push_back({0.0, fit_rem.slope, fit_rem.intercept, fit_rem.stderr_slope, fit_rem.r2});
  tfit.rows.push_back({1.0, fit_raw.slope, fit_raw.intercept, fit_raw.stderr_slope, fit_raw.r2});

  rep.tables = {std::move(tr), std::move(traw), std::move(tmean), std::move(tfit)};
  const bool in_band = fit_rem.slope >= cfg.slope_lo && fit_rem.slope <= cfg.slope_hi;
  const bool steeper = fit_raw.slope - fit_rem.slope >= cfg.slope_separation;
  rep.pass = in_band && steeper;
  rep.add("slope_remainder", fit_rem.slope);
  rep.add("stderr_slope_remainder", fit_rem.stderr_slope);
  rep.add("r2_remainder", fit_rem.r2);
  rep.add("slope_raw_error", fit_raw.slope);
  rep.add("slope_band_lo", cfg.slope_lo);
  rep.add("slope_band_hi", cfg.slope_hi);
  rep.add("slope_in_band", in_band);
  rep.add("remainder_steeper_by", fit_raw.slope - fit_rem.slope);
  rep.add("pass", rep.pass);
  return rep;
}

struct CltSummary {
  SampleMoments fhat_moments;
  SampleMoments quant_moments;
  double ad_stat_fhat = 0.0, ad_p_fhat = 0.0;
  double ad_stat_quant = 0.0, ad_p_quant = 0.0;
  double variance_ratio = 0.0;  // Var(sqrt(n) dpsi) f(psi)^2 / Var(sqrt(n) dF)
  bool degenerate = false;
};

// Normality and variance diagnostics for the centered, sqrt(n)-scaled CLT
// statistics. Degenerate (zero-variance) inputs are flagged instead of
// tested.
inline CltSummary compute_clt_summary(const std::vector<double>& fhat_stats,
                                      const std::vector<double>& quant_stats, double f_at_psi) {
  CltSummary s;
  s.fhat_moments = sample_moments(fhat_stats);
  s.quant_moments = sample_moments(quant_stats);
  if (!(s.fhat_moments.variance > 0.0) || !(s.quant_moments.variance > 0.0)) {
    s.degenerate = true;
    return s;
  }
  const AndersonDarlingResult a = anderson_darling_normality(fhat_stats);
  const AndersonDarlingResult b = anderson_darling_normality(quant_stats);
  s.ad_stat_fhat = a.a2_star;
  s.ad_p_fhat = a.p_value;
  s.ad_stat_quant = b.a2_star;
  s.ad_p_quant = b.p_value;
  s.variance_ratio = s.quant_moments.variance * f_at_psi * f_at_psi / s.fhat_moments.variance;
  return s;
}

inline Report run_clt(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::require_knn_kth_oracle(cfg, "run_clt");
  if (cfg.replicates < 100) throw std::invalid_argument("run_clt: need >= 100 replicates");
  const OracleLaw law = make_knn_kth_law(cfg.k, cfg.dimension);
  const double psi = law.quantile(cfg.p);
  const double fpsi = law.pdf(psi);

  Report rep;
  rep.experiment = "clt";
  Table t{"clt", {"n", "replicate", "fhat_stat", "quantile_stat"}, {}};
  Table tv{"clt_variance", {"n", "var_fhat", "var_quantile", "variance_ratio"}, {}};
  std::vector<double> last_a, last_b;
  for (double n : cfg.n_ladder) {
    std::vector<double> a(cfg.replicates), b(cfg.replicates);
    parallel_for(static_cast<std::size_t>(cfg.replicates), [&](std::size_t r) {
      const EmpiricalCdf e = detail::dispatch_dim(cfg.dimension, [&](auto dim) {
        return detail::replicate_ecdf<dim()>(cfg, n, r);
      });
      a[r] = std::sqrt(n) * (e.value(psi) - cfg.p);
      b[r] = std::sqrt(n) * (quantile(e, cfg.p).value - psi);
    });
    for (int r = 0; r < cfg.replicates; ++r)
      t.rows.push_back({n, static_cast<double>(r), a[r], b[r]});
    const SampleMoments ma = sample_moments(a), mb = sample_moments(b);
    const double ratio = ma.variance > 0.0 ? mb.variance * fpsi * fpsi / ma.variance : 0.0;
    tv.rows.push_back({n, ma.variance, mb.variance, ratio});
    last_a = std::move(a);
    last_b = std::move(b);
  }
  const CltSummary s = compute_clt_summary(last_a, last_b, fpsi);
  rep.tables = {std::move(t), std::move(tv)};
  rep.add("n", cfg.n_ladder.back());
  rep.add("psi_p", psi);
  rep.add("f_at_psi", fpsi);
  rep.add("degenerate", s.degenerate);
  if (!s.degenerate) {
    rep.add("ad_stat_fhat", s.ad_stat_fhat);
    rep.add("ad_p_fhat", s.ad_p_fhat);
    rep.add("ad_stat_quantile", s.ad_stat_quant);
    rep.add("ad_p_quantile", s.ad_p_quant);
    rep.add("mean_fhat_stat", s.fhat_moments.mean);
    rep.add("mean_quantile_stat", s.quant_moments.mean);
    rep.add("var_fhat_stat", s.fhat_moments.variance);
    rep.add("var_quantile_stat", s.quant_moments.variance);
    rep.add("skewness_quantile_stat", s.quant_moments.skewness);
    rep.add("kurtosis_quantile_stat", s.quant_moments.excess_kurtosis);
    rep.add("variance_ratio", s.variance_ratio);
    rep.pass = s.ad_p_fhat > cfg.ad_alpha && s.ad_p_quant > cfg.ad_alpha &&
               s.variance_ratio >= cfg.var_ratio_lo && s.variance_ratio <= cfg.var_ratio_hi;
  } else {
    rep.pass = false;
  }
  rep.add("pass", rep.pass);
  return rep;
}

// Trimmed and Winsorized means, centered by quadrature of the oracle
// quantile function and scaled by sqrt(n); evaluated at the largest rung.
inline Report run_means(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::require_knn_kth_oracle(cfg, "run_means");
  if (cfg.replicates < 100) throw std::invalid_argument("run_means: need >= 100 replicates");
  const OracleLaw law = make_knn_kth_law(cfg.k, cfg.dimension);
  const double integral =
      integrate([&](double u) { return law.quantile(u); }, cfg.p0, cfg.p1, 1e-8);
  const double trimmed_target = integral / (cfg.p1 - cfg.p0);
  const double winsorized_target =
      cfg.p0 * law.quantile(cfg.p0) + integral + (1.0 - cfg.p1) * law.quantile(cfg.p1);

  const double n = cfg.n_ladder.back();
  std::vector<double> ts(cfg.replicates), ws(cfg.replicates);
  parallel_for(static_cast<std::size_t>(cfg.replicates), [&](std::size_t r) {
    const EmpiricalCdf e = detail::dispatch_dim(cfg.dimension, [&](auto dim) {
      return detail::replicate_ecdf<dim()>(cfg, n, r);
    });
    ts[r] = std::sqrt(n) * (trimmed_mean(e, cfg.p0, cfg.p1) - trimmed_target);
    ws[r] = std::sqrt(n) * (winsorized_mean(e, cfg.p0, cfg.p1) - winsorized_target);
  });

  Report rep;
  rep.experiment = "means";
  Table t{"means", {"n", "replicate", "trimmed_scaled", "winsorized_scaled"}, {}};
  for (int r = 0; r < cfg.replicates; ++r)
    t.rows.push_back({n, static_cast<double>(r), ts[r], ws[r]});
  rep.tables.push_back(std::move(t));

  const SampleMoments mt = sample_moments(ts), mw = sample_moments(ws);
  const double se_t = std::sqrt(mt.variance / cfg.replicates);
  const double se_w = std::sqrt(mw.variance / cfg.replicates);
  bool pass = true;
  rep.add("n", n);
  rep.add("trimmed_target", trimmed_target);
  rep.add("winsorized_target", winsorized_target);
  rep.add("trimmed_mean_scaled", mt.mean);
  rep.add("trimmed_se", se_t);
  rep.add("winsorized_mean_scaled", mw.mean);
  rep.add("winsorized_se", se_w);
  if (mt.variance > 0.0 && mw.variance > 0.0) {
    const AndersonDarlingResult at = anderson_darling_normality(ts);
    const AndersonDarlingResult aw = anderson_darling_normality(ws);
    rep.add("ad_p_trimmed", at.p_value);
    rep.add("ad_p_winsorized", aw.p_value);
    pass = std::abs(mt.mean) <= 4.0 * se_t && std::abs(mw.mean) <= 4.0 * se_w &&
           at.p_value > cfg.ad_alpha && aw.p_value > cfg.ad_alpha;
  } else {
    rep.add("degenerate", true);
    pass = false;
  }
  rep.pass = pass;
  rep.add("pass", rep.pass);
  return rep;
}

// Law-of-the-iterated-logarithm tracks: per seed, the normalized quantile
// deviation along a dyadic ladder of nested windows, with running sup/inf.
inline Report run_lil(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::require_knn_kth_oracle(cfg, "run_lil");
  if (cfg.n_ladder.size() < 7)
    throw std::invalid_argument("run_lil: need a dyadic ladder with J >= 6 (>= 7 rungs)");
  if (!(cfg.n_ladder.front() >= 16.0))
    throw std::invalid_argument("run_lil: n0 must be >= 16 so that log log n > 0");
  for (std::size_t j = 1; j < cfg.n_ladder.size(); ++j) {
    if (std::abs(cfg.n_ladder[j] / cfg.n_ladder[j - 1] - 2.0) > 1e-9)
      throw std::invalid_argument("run_lil: ladder must be dyadic (n_{j+1} = 2 n_j)");
  }
  const OracleLaw law = make_knn_kth_law(cfg.k, cfg.dimension);
  const double psi = law.quantile(cfg.p);

  const std::size_t rungs = cfg.n_ladder.size();
  std::vector<std::vector<double>> stat(cfg.replicates, std::vector<double>(rungs));
  parallel_for(static_cast<std::size_t>(cfg.replicates), [&](std::size_t r) {
    for (std::size_t j = 0; j < rungs; ++j) {
      const double n = cfg.n_ladder[j];
      const EmpiricalCdf e = detail::dispatch_dim(cfg.dimension, [&](auto dim) {
        return detail::replicate_ecdf<dim()>(cfg, n, r);
      });
      const double denom = std::sqrt(2.0 * std::log(std::log(n)));
      stat[r][j] = std::sqrt(n) * (quantile(e, cfg.p).value - psi) / denom;
    }
  });

  Report rep;
  rep.experiment = "lil";
  Table t{"lil", {"replicate", "rung", "n", "statistic", "running_sup", "running_inf"}, {}};
  std::vector<double> final_sup(cfg.replicates), final_inf(cfg.replicates),
      last_dev(cfg.replicates);
  for (int r = 0; r < cfg.replicates; ++r) {
    double rs = -std::numeric_limits<double>::infinity();
    double ri = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < rungs; ++j) {
      rs = std::max(rs, stat[r][j]);
      ri = std::min(ri, stat[r][j]);
      t.rows.push_back({static_cast<double>(r), static_cast<double>(j), cfg.n_ladder[j],
                        stat[r][j], rs, ri});
    }
    final_sup[r] = rs;
    final_inf[r] = ri;
    const double n_last = cfg.n_ladder.back();
    last_dev[r] = stat[r][rungs - 1] * std::sqrt(2.0 * std::log(std::log(n_last)));
  }
  rep.tables.push_back(std::move(t));

  // nu_hat from the cross-seed spread of sqrt(n)(psi_hat - psi) at the top rung.
  const SampleMoments md = sample_moments(last_dev);
  const double nu_hat = std::sqrt(std::max(md.variance, 0.0));
  int in_band = 0;
  bool all_finite = true;
  for (int r = 0; r < cfg.replicates; ++r) {
    if (!std::isfinite(final_sup[r]) || !std::isfinite(final_inf[r])) all_finite = false;
    const double mag = std::max(final_sup[r], -final_inf[r]);
    if (nu_hat > 0.0 && mag >= 0.2 * nu_hat && mag <= 5.0 * nu_hat) ++in_band;
  }
  const double frac = static_cast<double>(in_band) / cfg.replicates;
  const SampleMoments ms = sample_moments(final_sup);
  rep.add("nu_hat", nu_hat);
  rep.add("mean_running_sup", ms.mean);
  rep.add("sd_running_sup", std::sqrt(std::max(ms.variance, 0.0)));
  rep.add("fraction_in_band", frac);
  rep.add("all_finite", all_finite);
  rep.pass = all_finite && frac >= 0.9;
  rep.add("pass", rep.pass);
  return rep;
}

// Limiting-variance estimators: replicate variance of sqrt(n)(F_hat(psi_p)-p)
// as the primary estimate, E[Delta(0,n)^2] from the cube-resampling coupling
// as an upper-bound diagnostic.
inline Report run_sigma(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::require_knn_kth_oracle(cfg, "run_sigma");
  if (cfg.replicates < 100) throw std::invalid_argument("run_sigma: need >= 100 replicates");
  const OracleLaw law = make_knn_kth_law(cfg.k, cfg.dimension);
  const double psi = law.quantile(cfg.p);
  const double n = cfg.n_ladder.back();
  const double r_trim = trim_radius(n, cfg.c_star_eff(), cfg.alpha_eff());

  FidiSpec fidi;
  fidi.thresholds = {psi};
  fidi.weights = {1.0};
  fidi.f_values = {cfg.p};

  std::vector<double> dev(cfg.replicates), delta(cfg.replicates);
  parallel_for(static_cast<std::size_t>(cfg.replicates), [&](std::size_t r) {
    detail::dispatch_dim(cfg.dimension, [&](auto dim) {
      constexpr int D = dim();
      const Window<D> w = make_window<D>(n);
      const SampleKey key{cfg.seed, r};
      const PointConfiguration<D> pts = sample_poisson<D>(w, key);
      const EmpiricalCdf e = build_ecdf<D>(pts, KnnKthScore<D>{cfg.k}, r_trim);
      dev[r] = std::sqrt(n) * (e.value(psi) - cfg.p);
      delta[r] = delta_coupling<D>(w, key, std::array<long long, D>{}, KnnKthScore<D>{cfg.k},
                                   r_trim, fidi);
      return 0;
    });
  });

  Report rep;
  rep.experiment = "sigma";
  Table t{"sigma", {"replicate", "fhat_stat", "delta0n"}, {}};
  std::vector<double> delta_sq(cfg.replicates);
  for (int r = 0; r < cfg.replicates; ++r) {
    t.rows.push_back({static_cast<double>(r), dev[r], delta[r]});
    delta_sq[r] = delta[r] * delta[r];
  }
  rep.tables.push_back(std::move(t));

  const SampleMoments mdev = sample_moments(dev);
  const SampleMoments mds = sample_moments(delta_sq);
  const double var_est = mdev.variance;
  const double mean_delta_sq = mds.mean;
  const double se_var = var_est * std::sqrt(2.0 / (cfg.replicates - 1.0));
  const double se_delta = std::sqrt(mds.variance / cfg.replicates);
  const double se_comb = std::sqrt(se_var * se_var + se_delta * se_delta);
  const bool ordering = mean_delta_sq >= var_est - 3.0 * se_comb;
  rep.add("n", n);
  rep.add("variance_estimate", var_est);
  rep.add("variance_se", se_var);
  rep.add("mean_delta_sq", mean_delta_sq);
  rep.add("mean_delta_sq_se", se_delta);
  rep.add("ordering_ok", ordering);
  rep.pass = var_est > 0.0 && mean_delta_sq > 0.0 && ordering;
  rep.add("pass", rep.pass);
  return rep;
}

// Raw sampling: per-replicate counts, plus the first replicate's points.
inline Report run_sample(const ExperimentConfig& cfg) {
  cfg.validate();
  Report rep;
  rep.experiment = "sample";
  Table tc{"sample_counts", {"n", "replicate", "count"}, {}};
  std::vector<std::string> cols{"n", "point"};
  for (int a = 0; a < cfg.dimension; ++a) cols.push_back("x" + std::to_string(a));
  Table tp{"sample_points", cols, {}};
  for (double n : cfg.n_ladder) {
    std::vector<double> counts(cfg.replicates, 0.0);
    parallel_for(static_cast<std::size_t>(cfg.replicates), [&](std::size_t r) {
      detail::dispatch_dim(cfg.dimension, [&](auto dim) {
        constexpr int D = dim();
        const auto pts = sample_poisson<D>(make_window<D>(n), SampleKey{cfg.seed, r});
        counts[r] = static_cast<double>(pts.size());
        if (r == 0) {
          for (std::size_t i = 0; i < pts.size(); ++i) {
            std::vector<double> row{n, static_cast<double>(i)};
            for (int a = 0; a < D; ++a) row.push_back(pts.points[i][a]);
            // tp is only touched by replicate 0; no race.
            tp.rows.push_back(std::move(row));
          }
        }
        return 0;
      });
    });
    for (int r = 0; r < cfg.replicates; ++r)
      tc.rows.push_back({n, static_cast<double>(r), counts[r]});
    const SampleMoments m = sample_moments(counts);
    rep.add("mean_count_n_" + format_double(n), m.mean);
  }
  rep.tables = {std::move(tc), std::move(tp)};
  rep.add("pass", rep.pass);
  return rep;
}

}  // namespace stabq
