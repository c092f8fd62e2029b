#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "stabq/geometry.hpp"
#include "stabq/oracles.hpp"
#include "stabq/stats.hpp"

using namespace stabq;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("kth-nearest-neighbor CDF: closed-form spot values", "[oracles]") {
  CHECK(knn_kth_cdf(0.0, 1, 2) == 0.0);
  CHECK(knn_kth_cdf(-1.0, 3, 2) == 0.0);

  // k=1, d=2: F(s) = 1 - e^{-pi s^2}; F(sqrt(ln 2 / pi)) = 1/2.
  const double s_half = std::sqrt(std::log(2.0) / kPi);
  CHECK(knn_kth_cdf(s_half, 1, 2) == Catch::Approx(0.5).epsilon(1e-12));

  // k=2, d=2, s=1: 1 - e^{-pi}(1 + pi).
  CHECK(knn_kth_cdf(1.0, 2, 2) ==
        Catch::Approx(1.0 - std::exp(-kPi) * (1.0 + kPi)).epsilon(1e-12));
  CHECK(knn_kth_cdf(1.0, 2, 2) == Catch::Approx(0.8210).margin(5e-4));
}

TEST_CASE("kth-nearest-neighbor density and its derivative", "[oracles]") {
  CHECK(knn_kth_pdf(0.0, 1, 2) == 0.0);
  CHECK(knn_kth_pdf(0.0, 3, 3) == 0.0);

  // k=1, d=2: g(s) = 2 pi s e^{-pi s^2}; g(1/2) = pi e^{-pi/4}.
  CHECK(knn_kth_pdf(0.5, 1, 2) == Catch::Approx(kPi * std::exp(-kPi / 4.0)).epsilon(1e-12));

  // Density integrates to one.
  for (int d : {2, 3}) {
    for (int k : {1, 2, 3}) {
      const double upper = std::pow(40.0 / unit_ball_volume(d), 1.0 / d) + 2.0;
      const double total = integrate([&](double s) { return knn_kth_pdf(s, k, d); }, 0.0, upper,
                                     1e-10);
      CHECK(total == Catch::Approx(1.0).epsilon(1e-8));
    }
  }

  // pdf equals the numerical derivative of the CDF.
  for (double s : {0.3, 0.5, 0.8, 1.2}) {
    const double h = 1e-6;
    const double fd = (knn_kth_cdf(s + h, 2, 2) - knn_kth_cdf(s - h, 2, 2)) / (2.0 * h);
    CHECK(knn_kth_pdf(s, 2, 2) == Catch::Approx(fd).epsilon(1e-5));
  }

  // Hand-derived pdf_deriv equals the numerical derivative of the pdf.
  for (int k : {1, 2, 3}) {
    for (double s : {0.25, 0.5, 0.9, 1.4}) {
      const double h = 1e-6;
      const double fd = (knn_kth_pdf(s + h, k, 2) - knn_kth_pdf(s - h, k, 2)) / (2.0 * h);
      CHECK(knn_kth_pdf_deriv(s, k, 2) == Catch::Approx(fd).margin(1e-5 * (1.0 + std::abs(fd))));
    }
  }
}

TEST_CASE("joint density of ordered neighbor distances", "[oracles]") {
  // Off the ordered cone the density vanishes.
  CHECK(knn_joint_pdf(std::vector<double>{0.5, 0.3}, 2) == 0.0);
  CHECK(knn_joint_pdf(std::vector<double>{-0.1, 0.3}, 2) == 0.0);

  // k=1 reduces to the kth-NN density with k=1.
  for (double s : {0.2, 0.7, 1.1}) {
    CHECK(knn_joint_pdf(std::vector<double>{s}, 2) ==
          Catch::Approx(knn_kth_pdf(s, 1, 2)).epsilon(1e-12));
  }

  // Marginal of s_k recovers the kth-NN density: k=2 by quadrature.
  for (double s2 : {0.4, 0.8, 1.2}) {
    const double marginal = integrate(
        [&](double s1) { return knn_joint_pdf(std::vector<double>{s1, s2}, 2); }, 0.0, s2, 1e-10);
    CHECK(marginal == Catch::Approx(knn_kth_pdf(s2, 2, 2)).epsilon(1e-6));
  }

  // k=3 via nested quadrature.
  const double s3 = 0.9;
  const double marginal3 = integrate(
      [&](double s2) {
        return integrate(
            [&](double s1) { return knn_joint_pdf(std::vector<double>{s1, s2, s3}, 2); }, 0.0, s2,
            1e-10);
      },
      0.0, s3, 1e-9);
  CHECK(marginal3 == Catch::Approx(knn_kth_pdf(s3, 3, 2)).epsilon(1e-6));
}

TEST_CASE("conditional densities g_j: support and normalization", "[oracles]") {
  const int k = 2, d = 2;
  const double R = 1.0;

  // j >= k lives on (0, R); j < k lives on (R, inf).
  CHECK(knn_conditional_pdf(1.2, 3, k, d, R) == 0.0);
  CHECK(knn_conditional_pdf(0.8, 1, k, d, R) == 0.0);
  CHECK(knn_conditional_pdf(0.8, 3, k, d, R) > 0.0);
  CHECK(knn_conditional_pdf(1.2, 1, k, d, R) > 0.0);

  for (int j : {0, 1, 2, 3, 5, 9}) {
    double total;
    if (j >= k) {
      total = integrate([&](double s) { return knn_conditional_pdf(s, j, k, d, R); }, 0.0, R,
                        1e-10);
    } else {
      const double upper = std::pow(std::pow(R, d) + 45.0 / unit_ball_volume(d), 1.0 / d);
      total = integrate([&](double s) { return knn_conditional_pdf(s, j, k, d, R); }, R, upper,
                        1e-10);
    }
    CHECK(total == Catch::Approx(1.0).epsilon(1e-7));
    // CDF companion agrees with the integrated density at an interior point.
    const double probe = j >= k ? 0.6 * R : 1.5 * R;
    const double lo = j >= k ? 0.0 : R;
    const double cdf_quad =
        integrate([&](double s) { return knn_conditional_pdf(s, j, k, d, R); }, lo, probe, 1e-10);
    CHECK(knn_conditional_cdf(probe, j, k, d, R) == Catch::Approx(cdf_quad).epsilon(1e-7));
  }
}

TEST_CASE("mixture identities tie the conditional laws to the full law", "[oracles]") {
  const int d = 2;
  const double R = 1.0;
  for (int k : {1, 2, 3}) {
    // sum_j p_j g_j = g on a grid spanning both branches (the identity is
    // between densities; the grid avoids the support boundary s = R itself).
    for (int i = 1; i <= 100; ++i) {
      const double s = 2.5 * (static_cast<double>(i) - 0.5) / 100.0;
      CHECK(knn_mixture_pdf(s, k, d, R) ==
            Catch::Approx(knn_kth_pdf(s, k, d)).margin(1e-8));
    }
    // The extended mixture integrates to one.
    const double upper = std::pow(std::pow(R, d) + 45.0 / unit_ball_volume(d), 1.0 / d);
    const double total =
        integrate([&](double s) { return knn_extended_pdf(s, k, d, R); }, 0.0, R, 1e-10) +
        integrate([&](double s) { return knn_extended_pdf(s, k, d, R); }, R, upper, 1e-10);
    CHECK(total == Catch::Approx(1.0).epsilon(1e-7));
  }
}

TEST_CASE("extended law matches simulation with an explicit extra point", "[oracles]") {
  // Sample xi~(0, P u {0, Y}) with Y uniform on B(0,R) and compare with the
  // mixture CDF.
  const int k = 2, d = 2;
  const double R = 1.0;
  const auto w = make_window<2>(144.0);  // side 12 around the origin
  const int n = 10000;
  std::vector<double> samples;
  samples.reserve(n);
  RngStream ystream(515);
  for (int rep = 0; rep < n; ++rep) {
    auto cfg = sample_poisson<2>(w, SampleKey{871, static_cast<std::uint64_t>(rep)});
    double yx, yy;
    do {
      yx = ystream.uniform(-R, R);
      yy = ystream.uniform(-R, R);
    } while (yx * yx + yy * yy > R * R);
    auto pts = cfg.points;
    pts.push_back({yx, yy});
    const PointConfiguration<2> with_y(std::move(pts), w);
    const KdTree<2> tree(with_y);
    samples.push_back(tree.knn({0.0, 0.0}, k).back().dist);
  }
  const double ks =
      ks_statistic(samples, [&](double s) { return knn_extended_cdf(s, k, d, R); });
  CHECK(ks < 0.03);
}

TEST_CASE("oracle quantiles invert the CDF", "[oracles]") {
  const OracleLaw law = make_knn_kth_law(1, 2);
  // Closed form: psi_{1/2} = sqrt(ln 2 / pi) = 0.469718...
  CHECK(law.quantile(0.5) == Catch::Approx(std::sqrt(std::log(2.0) / kPi)).margin(1e-9));
  CHECK(law.quantile(0.5) == Catch::Approx(0.469718).margin(1e-6));

  for (int i = 1; i <= 99; ++i) {
    const double p = static_cast<double>(i) / 100.0;
    CHECK(law.cdf(law.quantile(p)) == Catch::Approx(p).margin(1e-9));
  }

  // p -> 0+ decreases monotonically to the support edge.
  double prev = law.quantile(1e-1);
  for (double p : {1e-2, 1e-3, 1e-4}) {
    const double q = law.quantile(p);
    CHECK(q < prev);
    prev = q;
  }
  CHECK(prev < 0.02);

  CHECK_THROWS_AS(law.quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(law.quantile(1.0), std::invalid_argument);

  const OracleLaw ext = make_knn_extended_law(2, 2, 1.0);
  for (double p : {0.1, 0.5, 0.9}) {
    CHECK(ext.cdf(ext.quantile(p)) == Catch::Approx(p).margin(1e-9));
  }
}

TEST_CASE("gamma shape law", "[oracles]") {
  CHECK(gamma_shape_cdf(0.0, 4) == 0.0);
  // Gamma(1,1) is Exp(1).
  CHECK(gamma_shape_cdf(2.0, 1) == Catch::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));
  const double total = integrate([](double s) { return gamma_shape_pdf(s, 5); }, 0.0, 60.0, 1e-10);
  CHECK(total == Catch::Approx(1.0).epsilon(1e-8));
}
