#pragma once

// Tiny dependency-free SVG scatter/line plots, enough for quick-look figures
// of fits. Not a plotting library; one axes box, ticks, and data series.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace zplkit {

struct PlotSeries {
  std::vector<double> x, y;
  std::string color = "#4477aa";
  bool line = true;  // polyline when true, markers when false
};

namespace detail_svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail_svg

inline std::string render_svg_plot(const std::vector<PlotSeries>& series,
                                   const std::string& title, const std::string& x_label,
                                   const std::string& y_label) {
  if (series.empty()) throw std::invalid_argument("plot needs >= 1 series");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty())
      throw std::invalid_argument("plot series must be nonempty with equal x/y lengths");
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double w = 640, h = 420, l = 70, r = 20, t = 40, b = 50;
  auto px = [&](double x) { return l + (x - xmin) / (xmax - xmin) * (w - l - r); };
  auto py = [&](double y) { return h - b - (y - ymin) / (ymax - ymin) * (h - t - b); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
         "viewBox=\"0 0 640 420\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  out += "<rect x=\"" + detail_svg::num(l) + "\" y=\"" + detail_svg::num(t) + "\" width=\"" +
         detail_svg::num(w - l - r) + "\" height=\"" + detail_svg::num(h - t - b) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";
  out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + title +
         "</text>\n";
  out += "<text x=\"320\" y=\"408\" text-anchor=\"middle\">" + x_label + "</text>\n";
  out += "<text x=\"16\" y=\"210\" text-anchor=\"middle\" transform=\"rotate(-90 16 210)\">" +
         y_label + "</text>\n";

  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    out += "<line x1=\"" + detail_svg::num(px(fx)) + "\" y1=\"" + detail_svg::num(h - b) +
           "\" x2=\"" + detail_svg::num(px(fx)) + "\" y2=\"" + detail_svg::num(h - b + 5) +
           "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + detail_svg::num(px(fx)) + "\" y=\"" + detail_svg::num(h - b + 18) +
           "\" text-anchor=\"middle\">" + detail_svg::num(fx) + "</text>\n";
    out += "<line x1=\"" + detail_svg::num(l - 5) + "\" y1=\"" + detail_svg::num(py(fy)) +
           "\" x2=\"" + detail_svg::num(l) + "\" y2=\"" + detail_svg::num(py(fy)) +
           "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + detail_svg::num(l - 8) + "\" y=\"" + detail_svg::num(py(fy) + 4) +
           "\" text-anchor=\"end\">" + detail_svg::num(fy) + "</text>\n";
  }

  for (const auto& s : series) {
    if (s.line) {
      out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out += detail_svg::num(px(s.x[i])) + "," + detail_svg::num(py(s.y[i])) + " ";
      out += "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out += "<circle cx=\"" + detail_svg::num(px(s.x[i])) + "\" cy=\"" +
               detail_svg::num(py(s.y[i])) + "\" r=\"2.5\" fill=\"" + s.color + "\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

inline void write_svg_plot(const std::string& path, const std::vector<PlotSeries>& series,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write plot file: " + path);
  f << render_svg_plot(series, title, x_label, y_label);
}

}  // namespace zplkit
