// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <vector>

namespace mvsync {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  int width = 760;
  int height = 440;
  // NaN bounds auto-fit to the data with a small margin.
  double y_lo = std::numeric_limits<double>::quiet_NaN();
  double y_hi = std::numeric_limits<double>::quiet_NaN();
};

// Self-contained SVG line plot with axes, ticks, and a legend.
void write_line_plot(const std::string& path, const PlotSpec& spec);

}  // namespace mvsync
