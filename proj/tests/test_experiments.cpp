#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <vector>

#include "stabq/empirical.hpp"
#include "stabq/experiments.hpp"
#include "stabq/oracles.hpp"
#include "stabq/scores.hpp"
#include "stabq/stats.hpp"

using namespace stabq;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.family = "knn-kth";
  cfg.dimension = 2;
  cfg.k = 1;
  cfg.n_ladder = {256.0, 512.0, 1024.0, 2048.0};
  cfg.replicates = 8;
  cfg.seed = 555;
  cfg.ks_threshold = 0.5;  // plumbing check at small n; tightness is tested at n = 1e4
  return cfg;
}

}  // namespace

TEST_CASE("config validation rejects bad fields", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.validate();

  ExperimentConfig bad = cfg;
  bad.replicates = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.n_ladder = {100.0, 100.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.p0 = 0.8;
  bad.p1 = 0.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.p0 = 0.5;
  bad.p1 = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.family = "voronoi-volume";
  bad.dimension = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.family = "mst";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  // Resolved defaults: c_stab = w_d/2, c* = 4/c_stab, alpha = d.
  CHECK(cfg.alpha_eff() == 2.0);
  CHECK(cfg.c_stab_eff() == Catch::Approx(0.5 * unit_ball_volume(2)));
  CHECK(cfg.c_star_eff() == Catch::Approx(8.0 / unit_ball_volume(2)).epsilon(1e-12));
}

TEST_CASE("density check produces a KS row per replicate", "[experiments]") {
  const auto cfg = small_config();
  const Report rep = run_density_check(cfg);
  REQUIRE(rep.tables.size() == 2);
  const Table& t = rep.tables[0];
  CHECK(t.columns == std::vector<std::string>{"n", "replicate", "inner_count", "ks"});
  CHECK(t.rows.size() == cfg.n_ladder.size() * cfg.replicates);
  for (const auto& row : t.rows) {
    CHECK(row[3] > 0.0);
    CHECK(row[3] < 1.0);
  }
  CHECK(rep.tables[1].name == "density_scores");
  CHECK_FALSE(rep.tables[1].rows.empty());
  CHECK(rep.pass);

  ExperimentConfig voronoi = cfg;
  voronoi.family = "voronoi-volume";
  CHECK_THROWS_AS(run_density_check(voronoi), std::invalid_argument);
}

TEST_CASE("density check runs in dimension 3", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.dimension = 3;
  cfg.n_ladder = {4096.0, 8192.0};
  cfg.replicates = 4;
  cfg.ks_threshold = 0.06;
  const Report rep = run_density_check(cfg);
  CHECK(rep.tables[0].rows.size() == 8);
  for (const auto& row : rep.tables[0].rows) CHECK(row[2] > 500.0);
  CHECK(rep.pass);
}

TEST_CASE("mismatched oracle is a loud negative control", "[experiments]") {
  // KS distance between samples of the k=1 law and the k=2 oracle CDF.
  const auto cfg = small_config();
  const auto w = make_window<2>(4096.0);
  const auto pts = sample_poisson<2>(w, SampleKey{cfg.seed, 0});
  const auto e = build_ecdf<2>(pts, KnnKthScore<2>{1}, trim_radius(4096.0, cfg.c_star_eff(), 2.0));
  const double ks_wrong = ks_statistic(e.values, [](double s) { return knn_kth_cdf(s, 2, 2); });
  CHECK(ks_wrong > 0.2);
  const double ks_right = ks_statistic(e.values, [](double s) { return knn_kth_cdf(s, 1, 2); });
  CHECK(ks_right < 0.05);

  // The two oracle CDFs themselves separate by more than 0.2.
  const double sep = cdf_sup_distance([](double s) { return knn_kth_cdf(s, 1, 2); },
                                      [](double s) { return knn_kth_cdf(s, 2, 2); }, 0.0, 3.0);
  CHECK(sep > 0.2);
}

TEST_CASE("bahadur driver fits both series and enforces the rung minimum", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 12;
  const Report rep = run_bahadur_rate(cfg);
  REQUIRE(rep.tables.size() == 4);
  CHECK(rep.tables[0].columns ==
        std::vector<std::string>{"n", "replicate", "p", "remainder", "sup_remainder"});
  CHECK(rep.tables[3].rows.size() == 2);

  ExperimentConfig single = cfg;
  single.n_ladder = {1024.0};
  CHECK_THROWS_AS(run_bahadur_rate(single), std::invalid_argument);
  single.n_ladder = {512.0, 1024.0, 2048.0};
  CHECK_THROWS_AS(run_bahadur_rate(single), std::invalid_argument);
}

TEST_CASE("clt summary flags degenerate inputs", "[experiments]") {
  const std::vector<double> constant(200, 1.0);
  const std::vector<double> other(200, 2.0);
  const CltSummary s = compute_clt_summary(constant, other, 1.0);
  CHECK(s.degenerate);

  RngStream rng(4);
  std::vector<double> a(300), b(300);
  for (int i = 0; i < 300; ++i) {
    a[i] = rng.normal();
    b[i] = 2.0 * rng.normal();
  }
  const CltSummary ok = compute_clt_summary(a, b, 0.5);
  CHECK_FALSE(ok.degenerate);
  CHECK(ok.ad_p_fhat > 0.01);
  // Var(b) f^2 / Var(a) = 4 * 0.25 / 1.
  CHECK(ok.variance_ratio == Catch::Approx(1.0).margin(0.35));
}

TEST_CASE("clt driver needs replicates and emits variance trajectory", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 10;
  CHECK_THROWS_AS(run_clt(cfg), std::invalid_argument);

  cfg.replicates = 100;
  cfg.n_ladder = {512.0, 1024.0};
  const Report rep = run_clt(cfg);
  REQUIRE(rep.tables.size() == 2);
  CHECK(rep.tables[1].rows.size() == 2);
  bool saw_ratio = false;
  for (const auto& [k, v] : rep.summary) saw_ratio = saw_ratio || k == "variance_ratio";
  CHECK(saw_ratio);
}

TEST_CASE("means driver centers by quadrature targets", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 100;
  cfg.n_ladder = {2048.0};
  cfg.p0 = 0.2;
  cfg.p1 = 0.8;
  const Report rep = run_means(cfg);
  double trimmed_target = 0.0;
  for (const auto& [k, v] : rep.summary) {
    if (k == "trimmed_target") trimmed_target = std::strtod(v.c_str(), nullptr);
  }
  // Independent check of the quadrature target.
  const OracleLaw law = make_knn_kth_law(1, 2);
  const double direct =
      integrate([&](double u) { return law.quantile(u); }, 0.2, 0.8, 1e-10) / 0.6;
  CHECK(trimmed_target == Catch::Approx(direct).epsilon(1e-6));

  cfg.replicates = 20;
  CHECK_THROWS_AS(run_means(cfg), std::invalid_argument);
}

TEST_CASE("lil driver validates the ladder and produces finite tracks", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 6;
  cfg.n_ladder = {256.0, 512.0, 1024.0, 2048.0, 4096.0, 8192.0, 16384.0};
  const Report rep = run_lil(cfg);
  REQUIRE(rep.tables.size() == 1);
  CHECK(rep.tables[0].rows.size() == 6 * 7);
  for (const auto& row : rep.tables[0].rows) {
    CHECK(std::isfinite(row[3]));
    CHECK(row[4] >= row[3] - 1e-12);  // running sup dominates the track
    CHECK(row[5] <= row[3] + 1e-12);
  }

  ExperimentConfig bad = cfg;
  bad.n_ladder = {8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0};
  CHECK_THROWS_AS(run_lil(bad), std::invalid_argument);
  bad = cfg;
  bad.n_ladder = {256.0, 512.0, 1024.0, 2048.0, 4096.0, 8192.0};
  CHECK_THROWS_AS(run_lil(bad), std::invalid_argument);  // J < 6
  bad = cfg;
  bad.n_ladder = {256.0, 512.0, 1024.0, 2048.0, 4096.0, 8192.0, 16000.0};
  CHECK_THROWS_AS(run_lil(bad), std::invalid_argument);  // not dyadic
}

TEST_CASE("lil running sups concentrate inside the nu band", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 25;
  cfg.seed = 555;
  cfg.n_ladder = {256.0, 512.0, 1024.0, 2048.0, 4096.0, 8192.0, 16384.0};
  const Report rep = run_lil(cfg);
  double frac = 0.0, nu = 0.0;
  for (const auto& [k, v] : rep.summary) {
    if (k == "fraction_in_band") frac = std::strtod(v.c_str(), nullptr);
    if (k == "nu_hat") nu = std::strtod(v.c_str(), nullptr);
  }
  CHECK(nu > 0.0);
  CHECK(frac >= 0.9);
  CHECK(rep.pass);
}

TEST_CASE("iid normal control: running sup approaches the LIL constant", "[experiments]") {
  // Partial sums of iid standard normals, running sup of S_n / sqrt(2 n llog n)
  // over all n up to n0 * 2^20.
  const int seeds = 12;
  const std::size_t n0 = 16;
  const int J = 20;
  double acc = 0.0;
  for (int seed = 0; seed < seeds; ++seed) {
    RngStream rng{9090u, static_cast<std::uint64_t>(seed)};
    double sum = 0.0;
    double running = -1e300;
    std::size_t n_max = n0 << J;
    for (std::size_t n = 1; n <= n_max; ++n) {
      sum += rng.normal();
      if (n >= n0) {
        const double denom = std::sqrt(2.0 * n * std::log(std::log(static_cast<double>(n))));
        running = std::max(running, sum / denom);
      }
    }
    acc += running;
  }
  const double mean_sup = acc / seeds;
  // The LIL limsup is 1; at n ~ 1.6e7 the running sup typically sits within
  // ~20% of it (pilot-calibrated band).
  CHECK(mean_sup > 0.75);
  CHECK(mean_sup < 1.25);
}

TEST_CASE("sigma driver reports both estimators with the ordering diagnostic",
          "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 100;
  cfg.n_ladder = {512.0, 1024.0};
  const Report rep = run_sigma(cfg);
  double var_est = -1.0, delta_sq = -1.0;
  for (const auto& [k, v] : rep.summary) {
    if (k == "variance_estimate") var_est = std::strtod(v.c_str(), nullptr);
    if (k == "mean_delta_sq") delta_sq = std::strtod(v.c_str(), nullptr);
  }
  CHECK(var_est > 0.0);
  CHECK(delta_sq > 0.0);
  CHECK(rep.pass);
}

TEST_CASE("experiments are deterministic across thread counts", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 16;

  const char* saved = std::getenv("STABQ_THREADS");
  setenv("STABQ_THREADS", "1", 1);
  const Report serial = run_density_check(cfg);
  setenv("STABQ_THREADS", "4", 1);
  const Report threaded = run_density_check(cfg);
  if (saved)
    setenv("STABQ_THREADS", saved, 1);
  else
    unsetenv("STABQ_THREADS");

  REQUIRE(serial.tables[0].rows.size() == threaded.tables[0].rows.size());
  for (std::size_t i = 0; i < serial.tables[0].rows.size(); ++i) {
    REQUIRE(serial.tables[0].rows[i] == threaded.tables[0].rows[i]);
  }
  CHECK(serial.summary == threaded.summary);
}

TEST_CASE("sample driver mean counts track the window volume", "[experiments]") {
  ExperimentConfig cfg = small_config();
  cfg.n_ladder = {100.0, 400.0};
  cfg.replicates = 200;
  const Report rep = run_sample(cfg);
  REQUIRE(rep.tables.size() == 2);
  const Table& counts = rep.tables[0];
  double sum100 = 0.0;
  int n100 = 0;
  for (const auto& row : counts.rows) {
    if (row[0] == 100.0) {
      sum100 += row[2];
      ++n100;
    }
  }
  CHECK(n100 == 200);
  CHECK(std::abs(sum100 / n100 - 100.0) <= 4.0 * std::sqrt(100.0 / 200.0));
}
