#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "stabq/rng.hpp"

namespace stabq {

template <int D>
using Point = std::array<double, D>;

template <int D>
inline double squared_distance(const Point<D>& a, const Point<D>& b) {
  double s = 0.0;
  for (int i = 0; i < D; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

template <int D>
inline double distance(const Point<D>& a, const Point<D>& b) {
  return std::sqrt(squared_distance<D>(a, b));
}

// Axis-aligned closed box [lo_i, hi_i]^d.
template <int D>
struct Window {
  std::array<double, D> lo{};
  std::array<double, D> hi{};

  double side(int axis) const { return hi[axis] - lo[axis]; }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < D; ++i) v *= side(i);
    return v;
  }

  bool contains(const Point<D>& p) const {
    for (int i = 0; i < D; ++i) {
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
    }
    return true;
  }

  bool contains(const Window<D>& other) const {
    for (int i = 0; i < D; ++i) {
      if (other.lo[i] < lo[i] || other.hi[i] > hi[i]) return false;
    }
    return true;
  }

  void validate() const {
    for (int i = 0; i < D; ++i) {
      if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
        throw std::invalid_argument("Window: need lo < hi and finite bounds on every axis");
    }
  }
};

// Observation window of volume n, centered at the origin.
template <int D>
inline Window<D> make_window(double n) {
  static_assert(D >= 2, "dimension must be at least 2");
  if (!(n > 0.0)) throw std::invalid_argument("make_window: n must be positive");
  const double half = 0.5 * std::pow(n, 1.0 / D);
  Window<D> w;
  for (int i = 0; i < D; ++i) {
    w.lo[i] = -half;
    w.hi[i] = half;
  }
  return w;
}

// Strip a margin of width r from every face.
template <int D>
inline Window<D> shrink_window(const Window<D>& w, double r) {
  if (r < 0.0 || !std::isfinite(r)) throw std::invalid_argument("shrink_window: r must be >= 0");
  Window<D> out = w;
  for (int i = 0; i < D; ++i) {
    out.lo[i] = w.lo[i] + r;
    out.hi[i] = w.hi[i] - r;
    if (!(out.lo[i] < out.hi[i]))
      throw std::invalid_argument("shrink_window: margin 2r must be smaller than every side");
  }
  return out;
}

template <int D>
struct PointConfiguration {
  std::vector<Point<D>> points;
  Window<D> window;

  PointConfiguration() = default;
  PointConfiguration(std::vector<Point<D>> pts, const Window<D>& w)
      : points(std::move(pts)), window(w) {
    window.validate();
    for (const auto& p : points) {
      for (int i = 0; i < D; ++i) {
        if (!std::isfinite(p[i]))
          throw std::invalid_argument("PointConfiguration: non-finite coordinate");
      }
      if (!window.contains(p))
        throw std::invalid_argument("PointConfiguration: point outside carrier window");
    }
  }

  std::size_t size() const { return points.size(); }
};

// Restriction P|_w of a configuration to a sub-window.
template <int D>
inline PointConfiguration<D> restrict(const PointConfiguration<D>& cfg, const Window<D>& w) {
  if (!cfg.window.contains(w))
    throw std::invalid_argument("restrict: sub-window not contained in carrier window");
  std::vector<Point<D>> kept;
  for (const auto& p : cfg.points) {
    if (w.contains(p)) kept.push_back(p);
  }
  return PointConfiguration<D>(std::move(kept), w);
}

// Which process a stream belongs to; Resample is the independent copy used
// by the cube-resampling coupling.
enum class ProcessTag : std::uint64_t { Primary = 1, Resample = 2 };

// Identifies one realization of the underlying Poisson process.
struct SampleKey {
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  ProcessTag process = ProcessTag::Primary;
};

namespace detail {

// Points of the Poisson process inside the unit lattice cell z + [-1/2,1/2]^d.
// Each cell owns its own RNG stream, so any restriction of the same
// realization yields exactly the same points: growing windows are nested and
// resampling a single cell leaves all other cells untouched.
template <int D>
inline void cell_points(const SampleKey& key, const std::array<long long, D>& z,
                        std::vector<Point<D>>& out) {
  RngStream s{key.seed,
              key.replicate,
              static_cast<std::uint64_t>(key.process),
              static_cast<std::uint64_t>(z[0]),
              static_cast<std::uint64_t>(z[1]),
              D > 2 ? static_cast<std::uint64_t>(z[D - 1]) : 0xD3ull};
  const std::uint64_t count = s.poisson(1.0);
  for (std::uint64_t i = 0; i < count; ++i) {
    Point<D> p;
    for (int a = 0; a < D; ++a) p[a] = static_cast<double>(z[a]) + s.uniform(-0.5, 0.5);
    out.push_back(p);
  }
}

template <int D, typename Fn>
inline void for_each_cell(const Window<D>& w, Fn&& fn) {
  std::array<long long, D> zlo, zhi;
  for (int i = 0; i < D; ++i) {
    zlo[i] = static_cast<long long>(std::ceil(w.lo[i] - 0.5));
    zhi[i] = static_cast<long long>(std::floor(w.hi[i] + 0.5));
  }
  std::array<long long, D> z = zlo;
  for (;;) {
    fn(z);
    int axis = D - 1;
    while (axis >= 0) {
      if (++z[axis] <= zhi[axis]) break;
      z[axis] = zlo[axis];
      --axis;
    }
    if (axis < 0) break;
  }
}

}  // namespace detail

// Unit-intensity Poisson sample on w. The count is Poisson(volume(w)) and,
// given the count, points are iid uniform on w (superposition over lattice
// cells clipped to w).
template <int D>
inline PointConfiguration<D> sample_poisson(const Window<D>& w, const SampleKey& key) {
  w.validate();
  std::vector<Point<D>> pts;
  pts.reserve(static_cast<std::size_t>(w.volume() * 1.1) + 16);
  std::vector<Point<D>> cell;
  detail::for_each_cell<D>(w, [&](const std::array<long long, D>& z) {
    cell.clear();
    detail::cell_points<D>(key, z, cell);
    for (const auto& p : cell) {
      if (w.contains(p)) pts.push_back(p);
    }
  });
  return PointConfiguration<D>(std::move(pts), w);
}

template <int D>
inline PointConfiguration<D> sample_poisson(const Window<D>& w, std::uint64_t seed) {
  return sample_poisson<D>(w, SampleKey{seed, 0, ProcessTag::Primary});
}

// Same realization with the single lattice cell at z resampled from the
// independent copy of the process.
template <int D>
inline PointConfiguration<D> sample_poisson_resampled_cell(const Window<D>& w,
                                                           const SampleKey& key,
                                                           const std::array<long long, D>& zcell) {
  w.validate();
  std::vector<Point<D>> pts;
  std::vector<Point<D>> cell;
  detail::for_each_cell<D>(w, [&](const std::array<long long, D>& z) {
    cell.clear();
    SampleKey k = key;
    if (z == zcell) k.process = ProcessTag::Resample;
    detail::cell_points<D>(k, z, cell);
    for (const auto& p : cell) {
      if (w.contains(p)) pts.push_back(p);
    }
  });
  return PointConfiguration<D>(std::move(pts), w);
}

// Exact k-nearest-neighbor queries. Ties in distance are broken
// lexicographically on coordinates; points whose coordinates equal the query
// exactly are excluded (the query point never counts as its own neighbor).
template <int D>
class KdTree {
 public:
  struct Neighbor {
    int index;
    double dist;
  };

  KdTree() = default;

  explicit KdTree(const PointConfiguration<D>& cfg) : pts_(&cfg.points) {
    idx_.resize(pts_->size());
    std::iota(idx_.begin(), idx_.end(), 0);
    nodes_.reserve(pts_->size() / kLeafSize * 2 + 2);
    if (!idx_.empty()) root_ = build(0, static_cast<int>(idx_.size()));
  }

  std::size_t size() const { return pts_ ? pts_->size() : 0; }

  // k nearest points to y among the configuration minus {y}; sorted by
  // (distance, lexicographic coordinates). Throws if fewer than k candidates.
  std::vector<Neighbor> knn(const Point<D>& y, int k) const {
    if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
    std::vector<Neighbor> heap;  // max-heap on (dist2, lex)
    heap.reserve(k + 1);
    if (root_ >= 0) search(root_, y, k, heap);
    if (static_cast<int>(heap.size()) < k)
      throw std::invalid_argument("knn: configuration has fewer than k candidate points");
    std::vector<Neighbor> out(heap.begin(), heap.end());
    std::sort(out.begin(), out.end(), [&](const Neighbor& a, const Neighbor& b) {
      return less(a, b);
    });
    for (auto& nb : out) nb.dist = std::sqrt(nb.dist);
    return out;
  }

  // Like knn, but returns every candidate when fewer than k exist.
  std::vector<Neighbor> knn_upto(const Point<D>& y, int k) const {
    if (k < 1) throw std::invalid_argument("knn_upto: k must be >= 1");
    std::vector<Neighbor> heap;
    heap.reserve(k + 1);
    if (root_ >= 0) search(root_, y, k, heap);
    std::vector<Neighbor> out(heap.begin(), heap.end());
    std::sort(out.begin(), out.end(), [&](const Neighbor& a, const Neighbor& b) {
      return less(a, b);
    });
    for (auto& nb : out) nb.dist = std::sqrt(nb.dist);
    return out;
  }

  // Indices of all points with ||p - y|| <= r (closed ball), excluding exact
  // coordinate matches of y. Comparisons happen in distance space so that a
  // radius taken from knn() includes its own boundary point exactly.
  void radius(const Point<D>& y, double r, std::vector<int>& out) const {
    out.clear();
    if (root_ >= 0 && r >= 0.0) radius_search(root_, y, r, out);
  }

  const Point<D>& point(int i) const { return (*pts_)[i]; }

 private:
  static constexpr int kLeafSize = 16;

  struct Node {
    double split = 0.0;
    int axis = -1;  // -1 marks a leaf
    int left = -1, right = -1;
    int begin = 0, end = 0;
    std::array<double, D> box_lo{}, box_hi{};
  };

  int build(int begin, int end) {
    Node node;
    for (int i = 0; i < D; ++i) {
      node.box_lo[i] = std::numeric_limits<double>::infinity();
      node.box_hi[i] = -std::numeric_limits<double>::infinity();
    }
    for (int i = begin; i < end; ++i) {
      const Point<D>& p = (*pts_)[idx_[i]];
      for (int a = 0; a < D; ++a) {
        node.box_lo[a] = std::min(node.box_lo[a], p[a]);
        node.box_hi[a] = std::max(node.box_hi[a], p[a]);
      }
    }
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }
    int axis = 0;
    double spread = -1.0;
    for (int a = 0; a < D; ++a) {
      const double s = node.box_hi[a] - node.box_lo[a];
      if (s > spread) {
        spread = s;
        axis = a;
      }
    }
    const int mid = begin + (end - begin) / 2;
    std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                     [&](int a, int b) { return (*pts_)[a][axis] < (*pts_)[b][axis]; });
    node.axis = axis;
    node.split = (*pts_)[idx_[mid]][axis];
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  bool less(const Neighbor& a, const Neighbor& b) const {
    if (a.dist != b.dist) return a.dist < b.dist;
    return std::lexicographical_compare((*pts_)[a.index].begin(), (*pts_)[a.index].end(),
                                        (*pts_)[b.index].begin(), (*pts_)[b.index].end());
  }

  double box_dist2(const Node& node, const Point<D>& y) const {
    double s = 0.0;
    for (int i = 0; i < D; ++i) {
      double d = 0.0;
      if (y[i] < node.box_lo[i]) d = node.box_lo[i] - y[i];
      else if (y[i] > node.box_hi[i]) d = y[i] - node.box_hi[i];
      s += d * d;
    }
    return s;
  }

  void consider(int pi, const Point<D>& y, int k, std::vector<Neighbor>& heap) const {
    const Point<D>& p = (*pts_)[pi];
    if (p == y) return;  // exclude the query point itself
    const Neighbor cand{pi, squared_distance<D>(p, y)};
    auto cmp = [&](const Neighbor& a, const Neighbor& b) { return less(a, b); };
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), cmp);
    } else if (less(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), cmp);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), cmp);
    }
  }

  void search(int ni, const Point<D>& y, int k, std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[ni];
    if (static_cast<int>(heap.size()) == k && box_dist2(node, y) > heap.front().dist) return;
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) consider(idx_[i], y, k, heap);
      return;
    }
    const int near = (y[node.axis] < node.split) ? node.left : node.right;
    const int far = (near == node.left) ? node.right : node.left;
    search(near, y, k, heap);
    search(far, y, k, heap);
  }

  void radius_search(int ni, const Point<D>& y, double r, std::vector<int>& out) const {
    const Node& node = nodes_[ni];
    if (std::sqrt(box_dist2(node, y)) > r) return;
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const Point<D>& p = (*pts_)[idx_[i]];
        if (p == y) continue;
        if (std::sqrt(squared_distance<D>(p, y)) <= r) out.push_back(idx_[i]);
      }
      return;
    }
    radius_search(node.left, y, r, out);
    radius_search(node.right, y, r, out);
  }

  const std::vector<Point<D>>* pts_ = nullptr;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Convenience wrapper: ordered (point, distance) list.
template <int D>
inline std::vector<std::pair<Point<D>, double>> knn(const KdTree<D>& index, const Point<D>& y,
                                                    int k) {
  auto nbs = index.knn(y, k);
  std::vector<std::pair<Point<D>, double>> out;
  out.reserve(nbs.size());
  for (const auto& nb : nbs) out.emplace_back(index.point(nb.index), nb.dist);
  return out;
}

}  // namespace stabq
