// SPDX-License-Identifier: Apache-2.0
#include "harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "core/error.hpp"
#include "core/strutil.hpp"

namespace mvsync {

namespace {

constexpr const char* kColors[] = {"#1f6fb2", "#d1495b", "#3a9d6c",
                                   "#8c5ab8", "#c98a2b", "#4aa5a2"};

// Largest "nice" step (1/2/5 times a power of ten) giving <= max_ticks.
double nice_step(double span, int max_ticks) {
  if (!(span > 0.0)) return 1.0;
  double rough = span / max_ticks;
  double mag = std::pow(10.0, std::floor(std::log10(rough)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (mag * m >= rough) return mag * m;
  return mag * 10.0;
}

std::string tick_label(double v, double step) {
  int digits = std::max(0, static_cast<int>(std::ceil(-std::log10(step))));
  return format_fixed(v, std::min(digits, 6));
}

}  // namespace

void write_line_plot(const std::string& path, const PlotSpec& spec) {
  if (spec.series.empty()) throw ArgumentError("plot: no series");
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = spec.y_lo, y_hi = spec.y_hi;
  bool fit_y = std::isnan(y_lo) || std::isnan(y_hi);
  double fy_lo = std::numeric_limits<double>::infinity(), fy_hi = -fy_lo;
  for (const PlotSeries& s : spec.series) {
    if (s.x.size() != s.y.size())
      throw ArgumentError("plot: series '" + s.label + "' length mismatch");
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      fy_lo = std::min(fy_lo, s.y[i]);
      fy_hi = std::max(fy_hi, s.y[i]);
    }
  }
  if (!std::isfinite(x_lo)) throw ArgumentError("plot: no finite points");
  if (fit_y) {
    double pad = (fy_hi - fy_lo) * 0.08;
    if (pad == 0.0) pad = std::max(1.0, std::abs(fy_hi)) * 0.1;
    y_lo = fy_lo - pad;
    y_hi = fy_hi + pad;
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;

  const double ml = 64, mr = 16, mt = 34, mb = 46;
  double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
  auto sx = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto sy = [&](double y) {
    return mt + ph - (y - y_lo) / (y_hi - y_lo) * ph;
  };

  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("plot: cannot write " + path);

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
      << "\" height=\"" << spec.height << "\" viewBox=\"0 0 " << spec.width
      << " " << spec.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << spec.width / 2 << "\" y=\"20\" text-anchor=\"middle\""
      << " font-family=\"sans-serif\" font-size=\"14\">" << spec.title
      << "</text>\n";

  // Grid and ticks.
  double xs = nice_step(x_hi - x_lo, 8), ys = nice_step(y_hi - y_lo, 6);
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">\n";
  for (double x = std::ceil(x_lo / xs) * xs; x <= x_hi + 1e-9 * xs; x += xs) {
    out << "<line x1=\"" << sx(x) << "\" y1=\"" << mt << "\" x2=\"" << sx(x)
        << "\" y2=\"" << mt + ph << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << sx(x) << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\">" << tick_label(x, xs) << "</text>\n";
  }
  for (double y = std::ceil(y_lo / ys) * ys; y <= y_hi + 1e-9 * ys; y += ys) {
    out << "<line x1=\"" << ml << "\" y1=\"" << sy(y) << "\" x2=\"" << ml + pw
        << "\" y2=\"" << sy(y) << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << ml - 6 << "\" y=\"" << sy(y) + 4
        << "\" text-anchor=\"end\">" << tick_label(y, ys) << "</text>\n";
  }
  out << "</g>\n"
      << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#333\"/>\n";

  // Axis labels.
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << spec.height - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\""
      << " font-size=\"12\">" << spec.x_label << "</text>\n"
      << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\""
      << " font-size=\"12\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\">" << spec.y_label << "</text>\n";

  // Series.
  for (size_t k = 0; k < spec.series.size(); ++k) {
    const PlotSeries& s = spec.series[k];
    const char* color = kColors[k % std::size(kColors)];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      double cy = std::clamp(sy(s.y[i]), mt, mt + ph);
      out << format_fixed(sx(s.x[i]), 1) << "," << format_fixed(cy, 1) << " ";
    }
    out << "\"/>\n";
    if (s.x.size() <= 24) {
      for (size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        out << "<circle cx=\"" << format_fixed(sx(s.x[i]), 1) << "\" cy=\""
            << format_fixed(std::clamp(sy(s.y[i]), mt, mt + ph), 1)
            << "\" r=\"2.6\" fill=\"" << color << "\"/>\n";
      }
    }
  }

  // Legend (skipped for a single unlabeled series).
  bool legend = spec.series.size() > 1 || !spec.series[0].label.empty();
  if (legend) {
    double lx = ml + 10, ly = mt + 14;
    for (size_t k = 0; k < spec.series.size(); ++k) {
      const char* color = kColors[k % std::size(kColors)];
      out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 20
          << "\" y2=\"" << ly << "\" stroke=\"" << color
          << "\" stroke-width=\"2.2\"/>\n"
          << "<text x=\"" << lx + 26 << "\" y=\"" << ly + 4
          << "\" font-family=\"sans-serif\" font-size=\"11\">"
          << spec.series[k].label << "</text>\n";
      ly += 16;
    }
  }
  out << "</svg>\n";
  if (!out) throw IoError("plot: write failed for " + path);
}

}  // namespace mvsync
