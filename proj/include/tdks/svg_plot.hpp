#pragma once

// Minimal static SVG line plots for residual and energy histories.

#include <string>
#include <vector>

namespace tdks {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
};

/// Renders the series to an SVG document. Non-finite (and, on a log axis,
/// nonpositive) samples are skipped.
std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);
void write_svg(const std::string& path, const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace tdks
