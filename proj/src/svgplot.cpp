#include "npswab/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "npswab/errors.hpp"

namespace npswab {
namespace {

constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 24.0;
constexpr double kMarginTop = 42.0;
constexpr double kMarginBottom = 58.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  void include(double v) {
    if (!std::isfinite(v)) return;
    if (empty) {
      lo = hi = v;
      empty = false;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  // Open up degenerate ranges so the axis mapping stays well defined.
  void finalize() {
    if (empty) { lo = 0.0; hi = 1.0; }
    if (hi - lo < 1e-12) { lo -= 0.5; hi += 0.5; }
  }

  bool empty = true;
};

// Tick spacing of the form {1,2,5}*10^k giving roughly `target` intervals.
double nice_step(double span, int target) {
  const double raw = span / std::max(1, target);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * m >= raw) return mag * m;
  }
  return mag * 10.0;
}

class Canvas {
 public:
  Canvas(int width, int height, const std::string& title,
         const std::string& x_label, const std::string& y_label,
         Range x_range, Range y_range)
      : width_(width), height_(height), x_(x_range), y_(y_range) {
    plot_w_ = width_ - kMarginLeft - kMarginRight;
    plot_h_ = height_ - kMarginTop - kMarginBottom;
    svg_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
         << "\" height=\"" << height_ << "\" viewBox=\"0 0 " << width_ << " "
         << height_ << "\">\n";
    svg_ << "<rect width=\"" << width_ << "\" height=\"" << height_
         << "\" fill=\"white\"/>\n";
    if (!title.empty()) {
      svg_ << "<text x=\"" << fmt(width_ / 2.0)
           << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
              "font-size=\"16\">"
           << escape_xml(title) << "</text>\n";
    }
    draw_axes(x_label, y_label);
  }

  double map_x(double v) const {
    return kMarginLeft + (v - x_.lo) / (x_.hi - x_.lo) * plot_w_;
  }
  double map_y(double v) const {
    return kMarginTop + plot_h_ - (v - y_.lo) / (y_.hi - y_.lo) * plot_h_;
  }

  void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& color) {
    // Emit one <polyline> per run of finite samples.
    std::vector<std::pair<double, double>> run;
    auto flush = [&]() {
      if (run.size() >= 2) {
        svg_ << "<polyline fill=\"none\" stroke=\"" << color
             << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < run.size(); ++i) {
          if (i) svg_ << ' ';
          svg_ << fmt(run[i].first) << ',' << fmt(run[i].second);
        }
        svg_ << "\"/>\n";
      } else if (run.size() == 1) {
        svg_ << "<circle cx=\"" << fmt(run[0].first) << "\" cy=\""
             << fmt(run[0].second) << "\" r=\"2\" fill=\"" << color
             << "\"/>\n";
      }
      run.clear();
    };
    for (size_t i = 0; i < xs.size(); ++i) {
      if (std::isfinite(xs[i]) && std::isfinite(ys[i])) {
        run.emplace_back(map_x(xs[i]), map_y(ys[i]));
      } else {
        flush();
      }
    }
    flush();
  }

  void bar(double x0, double x1, double top, const std::string& color) {
    const double px0 = map_x(x0);
    const double px1 = map_x(x1);
    const double py = map_y(top);
    const double base = map_y(std::max(0.0, y_.lo));
    svg_ << "<rect x=\"" << fmt(px0) << "\" y=\"" << fmt(py) << "\" width=\""
         << fmt(px1 - px0) << "\" height=\"" << fmt(base - py) << "\" fill=\""
         << color << "\" fill-opacity=\"0.55\" stroke=\"" << color
         << "\" stroke-width=\"0.5\"/>\n";
  }

  /// Legend rows at the top-right corner of the plot area. `swatch_line`
  /// draws line samples; false draws filled squares (histograms).
  void legend(const std::vector<std::pair<std::string, std::string>>& items,
              bool swatch_line) {
    if (items.empty()) return;
    const double x = kMarginLeft + plot_w_ - 150.0;
    double y = kMarginTop + 14.0;
    for (const auto& [label, color] : items) {
      if (swatch_line) {
        svg_ << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(y - 4.0)
             << "\" x2=\"" << fmt(x + 22.0) << "\" y2=\"" << fmt(y - 4.0)
             << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      } else {
        svg_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y - 11.0)
             << "\" width=\"12\" height=\"12\" fill=\"" << color
             << "\" fill-opacity=\"0.55\"/>\n";
      }
      svg_ << "<text x=\"" << fmt(x + 28.0) << "\" y=\"" << fmt(y)
           << "\" font-family=\"sans-serif\" font-size=\"12\">"
           << escape_xml(label) << "</text>\n";
      y += 17.0;
    }
  }

  void write(const std::string& path) {
    svg_ << "</svg>\n";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError("cannot open plot file " + path);
    out << svg_.str();
    if (!out) throw WriteError("failed writing plot file " + path);
  }

 private:
  void draw_axes(const std::string& x_label, const std::string& y_label) {
    const double x0 = kMarginLeft, x1 = kMarginLeft + plot_w_;
    const double y0 = kMarginTop, y1 = kMarginTop + plot_h_;
    // Ticks first, so gridlines sit under the data and the frame.
    const double sx = nice_step(x_.hi - x_.lo, 6);
    for (double v = std::ceil(x_.lo / sx) * sx; v <= x_.hi + 1e-9 * sx;
         v += sx) {
      const double px = map_x(v);
      svg_ << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(y0) << "\" x2=\""
           << fmt(px) << "\" y2=\"" << fmt(y1)
           << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
      svg_ << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(y1 + 18.0)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
              "font-size=\"11\">"
           << fmt(v == 0.0 ? 0.0 : v) << "</text>\n";
    }
    const double sy = nice_step(y_.hi - y_.lo, 6);
    for (double v = std::ceil(y_.lo / sy) * sy; v <= y_.hi + 1e-9 * sy;
         v += sy) {
      const double py = map_y(v);
      svg_ << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(py) << "\" x2=\""
           << fmt(x1) << "\" y2=\"" << fmt(py)
           << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
      svg_ << "<text x=\"" << fmt(x0 - 6.0) << "\" y=\"" << fmt(py + 4.0)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
              "font-size=\"11\">"
           << fmt(v == 0.0 ? 0.0 : v) << "</text>\n";
    }
    svg_ << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\""
         << fmt(plot_w_) << "\" height=\"" << fmt(plot_h_)
         << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    if (!x_label.empty()) {
      svg_ << "<text x=\"" << fmt(x0 + plot_w_ / 2.0) << "\" y=\""
           << fmt(y1 + 42.0)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
              "font-size=\"13\">"
           << escape_xml(x_label) << "</text>\n";
    }
    if (!y_label.empty()) {
      const double cx = 18.0, cy = y0 + plot_h_ / 2.0;
      svg_ << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(cy)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
              "font-size=\"13\" transform=\"rotate(-90 " << fmt(cx) << ' '
           << fmt(cy) << ")\">" << escape_xml(y_label) << "</text>\n";
    }
  }

  int width_;
  int height_;
  Range x_;
  Range y_;
  double plot_w_ = 0.0;
  double plot_h_ = 0.0;
  std::ostringstream svg_;
};

}  // namespace

void LinePlot::write(const std::string& path) const {
  Range rx, ry;
  for (const PlotSeries& s : series) {
    if (s.x.size() != s.y.size()) {
      throw DimensionMismatch("plot series '" + s.label + "': " +
                              std::to_string(s.x.size()) + " x vs " +
                              std::to_string(s.y.size()) + " y samples");
    }
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        rx.include(s.x[i]);
        ry.include(s.y[i]);
      }
    }
  }
  rx.finalize();
  ry.finalize();
  // Headroom so curves do not hug the frame.
  const double pad = 0.04 * (ry.hi - ry.lo);
  ry.lo -= pad;
  ry.hi += pad;

  Canvas canvas(width, height, title, x_label, y_label, rx, ry);
  std::vector<std::pair<std::string, std::string>> items;
  for (const PlotSeries& s : series) {
    canvas.polyline(s.x, s.y, s.color);
    if (!s.label.empty()) items.emplace_back(s.label, s.color);
  }
  canvas.legend(items, true);
  canvas.write(path);
}

void Histogram::write(const std::string& path) const {
  if (bins < 1) throw ConfigError("histogram bins must be >= 1");
  Range rx;
  for (const HistogramSeries& s : series) {
    for (double v : s.values) rx.include(v);
  }
  rx.finalize();

  const double bin_w = (rx.hi - rx.lo) / bins;
  std::vector<std::vector<int>> counts(series.size(),
                                       std::vector<int>(bins, 0));
  int peak = 1;
  for (size_t k = 0; k < series.size(); ++k) {
    for (double v : series[k].values) {
      if (!std::isfinite(v)) continue;
      const int b = std::clamp(static_cast<int>((v - rx.lo) / bin_w), 0,
                               bins - 1);
      peak = std::max(peak, ++counts[k][b]);
    }
  }
  Range ry;
  ry.include(0.0);
  ry.include(peak * 1.08);  // headroom above the tallest bar
  ry.finalize();

  Canvas canvas(width, height, title, x_label, y_label, rx, ry);
  std::vector<std::pair<std::string, std::string>> items;
  for (size_t k = 0; k < series.size(); ++k) {
    for (int b = 0; b < bins; ++b) {
      if (counts[k][b] == 0) continue;
      canvas.bar(rx.lo + b * bin_w, rx.lo + (b + 1) * bin_w, counts[k][b],
                 series[k].color);
    }
    if (!series[k].label.empty()) {
      items.emplace_back(series[k].label, series[k].color);
    }
  }
  canvas.legend(items, false);
  canvas.write(path);
}

}  // namespace npswab
