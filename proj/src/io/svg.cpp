#include "mf/io/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mf/error.hpp"

namespace mf::io {

namespace {

const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string grouped_bar_chart_svg(const BarChart& chart) {
  if (chart.values.size() != chart.groups.size()) throw DataError("bar chart: one value row per group required");
  for (const auto& row : chart.values) {
    if (row.size() != chart.series.size()) throw DataError("bar chart: one value per series required");
  }

  double lo = INFINITY, hi = 0.0;
  for (const auto& row : chart.values) {
    for (double v : row) {
      if (v > 0) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (hi <= 0) {
    lo = 1;
    hi = 10;
  }
  const int dec_lo = static_cast<int>(std::floor(std::log10(lo)));
  int dec_hi = static_cast<int>(std::ceil(std::log10(hi)));
  if (dec_hi == dec_lo) ++dec_hi;

  const double left = 80, right = 170, top = 40, bottom = 50, plot_h = 320;
  const double bar_w = 14, group_gap = 24;
  const double group_w = bar_w * static_cast<double>(chart.series.size()) + group_gap;
  const double plot_w = std::max(200.0, group_w * static_cast<double>(chart.groups.size()));
  const double width = left + plot_w + right, height = top + plot_h + bottom;
  auto y_of = [&](double v) {
    const double t = (std::log10(v) - dec_lo) / (dec_hi - dec_lo);
    return top + plot_h * (1.0 - t);
  };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << xml_escape(chart.title) << "</text>\n";

  for (int d = dec_lo; d <= dec_hi; ++d) {
    const double y = y_of(std::pow(10.0, d));
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left + plot_w) << "\" y2=\""
       << num(y) << "\" stroke=\"#dddddd\"/>\n"
       << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">1e" << d << "</text>\n";
  }
  os << "<text transform=\"translate(18," << num(top + plot_h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << xml_escape(chart.y_label) << "</text>\n";

  for (std::size_t g = 0; g < chart.groups.size(); ++g) {
    const double gx = left + group_gap / 2 + group_w * static_cast<double>(g);
    for (std::size_t s = 0; s < chart.series.size(); ++s) {
      const double v = chart.values[g][s];
      if (v <= 0) continue;
      const double y = y_of(v);
      os << "<rect x=\"" << num(gx + bar_w * static_cast<double>(s)) << "\" y=\"" << num(y) << "\" width=\""
         << num(bar_w - 1) << "\" height=\"" << num(top + plot_h - y) << "\" fill=\"" << kPalette[s % 8] << "\"/>\n";
    }
    os << "<text x=\"" << num(gx + bar_w * static_cast<double>(chart.series.size()) / 2) << "\" y=\""
       << num(top + plot_h + 18) << "\" text-anchor=\"middle\">" << xml_escape(chart.groups[g]) << "</text>\n";
  }
  os << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\"" << num(left + plot_w)
     << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"black\"/>\n";

  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const double y = top + 14 * static_cast<double>(s);
    os << "<rect x=\"" << num(left + plot_w + 16) << "\" y=\"" << num(y) << "\" width=\"10\" height=\"10\" fill=\""
       << kPalette[s % 8] << "\"/>\n"
       << "<text x=\"" << num(left + plot_w + 32) << "\" y=\"" << num(y + 9) << "\">" << xml_escape(chart.series[s])
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace mf::io
