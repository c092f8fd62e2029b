#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabq/format.hpp"
#include "stabq/stats.hpp"

namespace stabq {

namespace detail {

struct SvgAxis {
  double lo = 0.0, hi = 1.0;   // data range
  double px0 = 0.0, px1 = 1.0; // pixel range
  double to_px(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

inline void svg_open(std::ofstream& out, int w, int h) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
}

}  // namespace detail

// Log-log scatter of (x, y) with the fitted line drawn from the fit
// parameters. The line element carries data-slope / data-intercept so the
// fit can be parsed back out of the artifact.
inline void emit_svg_ratefit(const std::filesystem::path& path, std::span<const double> xs,
                             std::span<const double> ys, const RateFit& fit) {
  if (xs.size() != ys.size() || xs.empty())
    throw std::invalid_argument("emit_svg_ratefit: mismatched or empty data");
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("emit_svg_ratefit: cannot open '" + path.string() + "'");

  constexpr int W = 640, H = 480, M = 60;
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw std::invalid_argument("emit_svg_ratefit: data must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  detail::SvgAxis ax, ay;
  ax.lo = *std::min_element(lx.begin(), lx.end());
  ax.hi = *std::max_element(lx.begin(), lx.end());
  ay.lo = *std::min_element(ly.begin(), ly.end());
  ay.hi = *std::max_element(ly.begin(), ly.end());
  const double padx = 0.05 * (ax.hi - ax.lo + 1e-12);
  const double pady = 0.05 * (ay.hi - ay.lo + 1e-12);
  ax.lo -= padx; ax.hi += padx;
  ay.lo -= pady; ay.hi += pady;
  ax.px0 = M; ax.px1 = W - M;
  ay.px0 = H - M; ay.px1 = M;  // y grows upward

  detail::svg_open(out, W, H);
  out << "<g data-xlog-lo=\"" << format_double(ax.lo) << "\" data-xlog-hi=\""
      << format_double(ax.hi) << "\" data-ylog-lo=\"" << format_double(ay.lo)
      << "\" data-ylog-hi=\"" << format_double(ay.hi) << "\">\n";
  out << "<rect x=\"" << M << "\" y=\"" << M << "\" width=\"" << (W - 2 * M) << "\" height=\""
      << (H - 2 * M) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < lx.size(); ++i) {
    out << "<circle cx=\"" << format_double(ax.to_px(lx[i])) << "\" cy=\""
        << format_double(ay.to_px(ly[i])) << "\" r=\"4\" fill=\"steelblue\"/>\n";
  }
  const double yfit0 = fit.intercept + fit.slope * ax.lo;
  const double yfit1 = fit.intercept + fit.slope * ax.hi;
  out << "<line data-slope=\"" << format_double(fit.slope) << "\" data-intercept=\""
      << format_double(fit.intercept) << "\" x1=\"" << format_double(ax.to_px(ax.lo))
      << "\" y1=\"" << format_double(ay.to_px(yfit0)) << "\" x2=\""
      << format_double(ax.to_px(ax.hi)) << "\" y2=\"" << format_double(ay.to_px(yfit1))
      << "\" stroke=\"crimson\" stroke-width=\"2\"/>\n";
  out << "</g>\n</svg>\n";
  if (!out) throw std::runtime_error("emit_svg_ratefit: write failed for '" + path.string() + "'");
}

// Histogram with an optional reference density overlay.
inline void emit_svg_histogram(const std::filesystem::path& path, std::vector<double> samples,
                               int bins, const std::function<double(double)>& pdf = nullptr) {
  if (samples.empty()) throw std::invalid_argument("emit_svg_histogram: empty sample");
  if (bins < 2) throw std::invalid_argument("emit_svg_histogram: need >= 2 bins");
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("emit_svg_histogram: cannot open '" + path.string() + "'");

  std::sort(samples.begin(), samples.end());
  const double lo = samples.front(), hi = samples.back();
  const double width = (hi - lo) > 0 ? (hi - lo) : 1.0;
  std::vector<double> density(bins, 0.0);
  const double bw = width / bins;
  for (double v : samples) {
    int b = static_cast<int>((v - lo) / bw);
    b = std::clamp(b, 0, bins - 1);
    density[b] += 1.0;
  }
  double dmax = 0.0;
  for (double& d : density) {
    d /= samples.size() * bw;
    dmax = std::max(dmax, d);
  }
  std::vector<double> overlay;
  if (pdf) {
    for (int i = 0; i <= 256; ++i) {
      const double x = lo + width * i / 256.0;
      const double v = pdf(x);
      overlay.push_back(v);
      dmax = std::max(dmax, v);
    }
  }

  constexpr int W = 640, H = 480, M = 50;
  detail::SvgAxis ax{lo, lo + width, M, W - M};
  detail::SvgAxis ay{0.0, dmax * 1.05 + 1e-12, H - M, M};
  detail::svg_open(out, W, H);
  for (int b = 0; b < bins; ++b) {
    const double x0 = ax.to_px(lo + b * bw);
    const double x1 = ax.to_px(lo + (b + 1) * bw);
    const double y0 = ay.to_px(0.0);
    const double y1 = ay.to_px(density[b]);
    out << "<rect x=\"" << format_double(x0) << "\" y=\"" << format_double(y1) << "\" width=\""
        << format_double(x1 - x0) << "\" height=\"" << format_double(y0 - y1)
        << "\" fill=\"lightsteelblue\" stroke=\"white\"/>\n";
  }
  if (pdf) {
    out << "<polyline fill=\"none\" stroke=\"crimson\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < overlay.size(); ++i) {
      const double x = lo + width * static_cast<double>(i) / 256.0;
      if (i) out << ' ';
      out << format_double(ax.to_px(x)) << ',' << format_double(ay.to_px(overlay[i]));
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
  if (!out)
    throw std::runtime_error("emit_svg_histogram: write failed for '" + path.string() + "'");
}

}  // namespace stabq
