#pragma once

#include <string>
#include <vector>

namespace npswab {

/// One named curve of a line chart. `x` and `y` must have equal length;
/// non-finite samples split the curve into separate segments.
struct PlotSeries {
  std::string label;
  std::string color = "#1f77b4";  // CSS color
  std::vector<double> x;
  std::vector<double> y;
};

/// Multi-series line chart rendered as a standalone static SVG file.
/// Output is deterministic: equal inputs produce byte-identical files.
struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 860;   // pixels
  int height = 480;  // pixels
  std::vector<PlotSeries> series;

  void write(const std::string& path) const;  // throws WriteError
};

/// One named sample set of a histogram.
struct HistogramSeries {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<double> values;
};

/// Overlaid histograms sharing one equal-width bin grid spanning the pooled
/// range of every series. Same determinism guarantee as LinePlot.
struct Histogram {
  std::string title;
  std::string x_label;
  std::string y_label = "count";
  int width = 860;
  int height = 480;
  int bins = 20;
  std::vector<HistogramSeries> series;

  void write(const std::string& path) const;  // throws WriteError
};

}  // namespace npswab
