#pragma once

#include <string>
#include <utility>
#include <vector>

namespace rlab {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
  bool markers_only = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;  // non-positive x values are dropped
};

// Self-contained SVG line/scatter chart.
std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace rlab
