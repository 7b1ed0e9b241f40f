#pragma once

#include <string>
#include <vector>

namespace mf::io {

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> groups;  // x-axis categories
  std::vector<std::string> series;  // one bar per series inside each group
  /// values[g][s]; non-positive values are drawn as empty bars.
  std::vector<std::vector<double>> values;
};

/// Grouped bar chart with a log10 value axis as standalone SVG markup.
std::string grouped_bar_chart_svg(const BarChart& chart);

std::string xml_escape(const std::string& s);

}  // namespace mf::io
