#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "stabq/geometry.hpp"
#include "stabq/special.hpp"

using namespace stabq;

namespace {

// Brute-force kNN oracle: full pairwise scan with the same tie-break rule.
template <int D>
std::vector<std::pair<int, double>> brute_knn(const std::vector<Point<D>>& pts, const Point<D>& y,
                                              int k) {
  std::vector<std::pair<int, double>> all;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i] == y) continue;
    all.emplace_back(static_cast<int>(i), distance<D>(pts[i], y));
  }
  std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return std::lexicographical_compare(pts[a.first].begin(), pts[a.first].end(),
                                        pts[b.first].begin(), pts[b.first].end());
  });
  all.resize(std::min<std::size_t>(k, all.size()));
  return all;
}

}  // namespace

TEST_CASE("make_window produces the right volumes", "[geometry]") {
  const auto w1 = make_window<2>(1.0);
  CHECK(w1.lo[0] == Catch::Approx(-0.5));
  CHECK(w1.hi[1] == Catch::Approx(0.5));
  CHECK(w1.volume() == Catch::Approx(1.0).epsilon(1e-12));

  const auto w16 = make_window<2>(16.0);
  CHECK(w16.side(0) == Catch::Approx(4.0));
  CHECK(w16.volume() == Catch::Approx(16.0).epsilon(1e-12));

  const auto w3 = make_window<3>(1000.0);
  CHECK(w3.side(2) == Catch::Approx(10.0));
  CHECK(w3.volume() == Catch::Approx(1000.0).epsilon(1e-12));

  CHECK_THROWS_AS(make_window<2>(0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_window<2>(-3.0), std::invalid_argument);
}

TEST_CASE("shrink_window strips margins and rejects degenerate margins", "[geometry]") {
  const auto w = make_window<2>(100.0);  // side 10
  const auto same = shrink_window(w, 0.0);
  CHECK(same.lo[0] == w.lo[0]);
  CHECK(same.hi[1] == w.hi[1]);

  const auto inner = shrink_window(w, 1.0);
  CHECK(inner.side(0) == Catch::Approx(8.0));
  CHECK(inner.lo[0] == Catch::Approx(-4.0));

  const auto small = make_window<2>(4.0);  // side 2
  CHECK_THROWS_AS(shrink_window(small, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(shrink_window(w, -0.1), std::invalid_argument);
}

TEST_CASE("restrict filters points and composes", "[geometry]") {
  const auto w = make_window<2>(100.0);
  std::vector<Point<2>> pts = {{0.0, 0.0}, {3.0, 3.0}, {-4.0, 4.0}};
  const PointConfiguration<2> cfg(pts, w);

  const auto same = restrict(cfg, w);
  CHECK(same.size() == 3);

  const auto inner = shrink_window(w, 2.5);  // [-2.5, 2.5]^2
  const auto sub = restrict(cfg, inner);
  REQUIRE(sub.size() == 1);
  CHECK(sub.points[0] == Point<2>{0.0, 0.0});

  const auto mid = shrink_window(w, 1.0);
  const auto twice = restrict(restrict(cfg, mid), inner);
  CHECK(twice.points == sub.points);

  Window<2> outside = make_window<2>(400.0);
  CHECK_THROWS_AS(restrict(cfg, outside), std::invalid_argument);
}

TEST_CASE("poisson sampling: count distribution and determinism", "[geometry]") {
  const auto w = make_window<2>(10000.0);
  // Mean and variance of the count over replicates.
  const int reps = 1000;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto cfg = sample_poisson<2>(w, SampleKey{123, static_cast<std::uint64_t>(r)});
    const double c = static_cast<double>(cfg.size());
    sum += c;
    sum2 += c * c;
  }
  const double mean = sum / reps;
  const double var = sum2 / reps - mean * mean;
  CHECK(std::abs(mean - 10000.0) <= 4.0 * std::sqrt(10000.0 / reps));
  CHECK(std::abs(var / 10000.0 - 1.0) < 0.05 + 3.0 * std::sqrt(2.0 / reps));

  // Determinism: identical seeds give bit-identical configurations.
  const auto a = sample_poisson<2>(w, SampleKey{7, 3});
  const auto b = sample_poisson<2>(w, SampleKey{7, 3});
  REQUIRE(a.size() == b.size());
  CHECK(a.points == b.points);
}

TEST_CASE("poisson count matches the Poisson CDF at lambda=100", "[geometry]") {
  const auto w = make_window<2>(100.0);
  const int reps = 10000;
  std::vector<int> counts(reps);
  int max_k = 0;
  for (int r = 0; r < reps; ++r) {
    counts[r] = static_cast<int>(sample_poisson<2>(w, SampleKey{99, static_cast<std::uint64_t>(r)}).size());
    max_k = std::max(max_k, counts[r]);
  }
  std::vector<double> hist(max_k + 1, 0.0);
  for (int c : counts) hist[c] += 1.0;
  double acc = 0.0, ks = 0.0;
  for (int k = 0; k <= max_k; ++k) {
    acc += hist[k] / reps;
    ks = std::max(ks, std::abs(acc - poisson_cdf(k, 100.0)));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("restriction of a sample equals a sample of the restriction", "[geometry]") {
  // The lattice-cell streams make P|_w consistent across nested windows.
  const auto big = make_window<2>(4096.0);
  const auto small = make_window<2>(1024.0);
  const SampleKey key{2024, 5};
  const auto whole = sample_poisson<2>(big, key);
  const auto direct = sample_poisson<2>(small, key);
  const auto restricted = restrict(whole, small);
  REQUIRE(direct.size() == restricted.size());
  auto a = direct.points, b = restricted.points;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("restricted sample count is Poisson with the sub-window volume", "[geometry]") {
  const auto w = make_window<2>(900.0);
  const auto sub = shrink_window(w, 5.0);  // side 20, volume 400
  const int reps = 600;
  double sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto cfg = sample_poisson<2>(w, SampleKey{55, static_cast<std::uint64_t>(r)});
    sum += static_cast<double>(restrict(cfg, sub).size());
  }
  CHECK(std::abs(sum / reps - sub.volume()) <= 4.0 * std::sqrt(sub.volume() / reps));
}

TEST_CASE("knn: collinear example and lexicographic tie-break", "[geometry]") {
  const auto w = make_window<2>(100.0);
  const PointConfiguration<2> cfg({{0.0, 0.0}, {1.0, 0.0}, {3.0, 0.0}}, w);
  const KdTree<2> tree(cfg);
  const auto nbs = knn<2>(tree, {0.0, 0.0}, 2);
  REQUIRE(nbs.size() == 2);
  CHECK(nbs[0].first == Point<2>{1.0, 0.0});
  CHECK(nbs[0].second == Catch::Approx(1.0));
  CHECK(nbs[1].first == Point<2>{3.0, 0.0});
  CHECK(nbs[1].second == Catch::Approx(3.0));

  // Equidistant neighbors: (0,1) precedes (1,0) lexicographically.
  const PointConfiguration<2> tie({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}, w);
  const KdTree<2> tietree(tie);
  const auto first = knn<2>(tietree, {0.0, 0.0}, 1);
  CHECK(first[0].first == Point<2>{0.0, 1.0});

  CHECK_THROWS_AS(tree.knn({0.0, 0.0}, 5), std::invalid_argument);
}

TEST_CASE("knn equals brute force on random configurations", "[geometry]") {
  const auto w = make_window<2>(200.0);
  const auto cfg = sample_poisson<2>(w, SampleKey{31, 0});
  REQUIRE(cfg.size() > 50);
  const KdTree<2> tree(cfg);
  for (int k = 1; k <= 10; ++k) {
    for (std::size_t qi = 0; qi < std::min<std::size_t>(cfg.size(), 40); ++qi) {
      const auto& y = cfg.points[qi];
      const auto fast = tree.knn(y, k);
      const auto slow = brute_knn<2>(cfg.points, y, k);
      REQUIRE(fast.size() == slow.size());
      for (std::size_t i = 0; i < fast.size(); ++i) {
        CHECK(fast[i].index == slow[i].first);
      }
    }
  }
}

TEST_CASE("knn equals brute force in dimension 3", "[geometry]") {
  const auto w = make_window<3>(512.0);
  const auto cfg = sample_poisson<3>(w, SampleKey{77, 0});
  const KdTree<3> tree(cfg);
  RngStream pick(3);
  for (int q = 0; q < 200; ++q) {
    const auto& y = cfg.points[static_cast<std::size_t>(pick.uniform01() * cfg.size())];
    const auto fast = tree.knn(y, 4);
    const auto slow = brute_knn<3>(cfg.points, y, 4);
    for (std::size_t i = 0; i < fast.size(); ++i) REQUIRE(fast[i].index == slow[i].first);
  }
}

TEST_CASE("radius query matches a linear scan", "[geometry]") {
  const auto w = make_window<2>(400.0);
  const auto cfg = sample_poisson<2>(w, SampleKey{13, 1});
  const KdTree<2> tree(cfg);
  const Point<2> y{1.0, -2.0};
  std::vector<int> got;
  tree.radius(y, 3.5, got);
  std::sort(got.begin(), got.end());
  std::vector<int> want;
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    if (cfg.points[i] == y) continue;
    if (distance<2>(cfg.points[i], y) <= 3.5) want.push_back(static_cast<int>(i));
  }
  CHECK(got == want);
}
