#include "cgrl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "cgrl/checkpoint.hpp"
#include "cgrl/errors.hpp"
#include "cgrl/metrics.hpp"

namespace cgrl {

std::vector<double> moving_average(const std::vector<double>& values, int window) {
  if (window < 1) throw InvalidInput("moving average window must be at least 1");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= static_cast<std::size_t>(window)) sum -= values[i - window];
    const auto n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

int smoothing_window(std::size_t n, double fraction) {
  if (!(fraction > 0.0)) throw InvalidInput("window fraction must be positive");
  return std::max(1, static_cast<int>(std::lround(fraction * static_cast<double>(n))));
}

namespace {

std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys, double x0,
                     double x1, double y0, double y1, const char* style) {
  const double w = 720, h = 400, left = 60, top = 20;
  std::string pts;
  char buf[64];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double px = left + (x1 > x0 ? (xs[i] - x0) / (x1 - x0) : 0.5) * w;
    const double py = top + (y1 > y0 ? (y1 - ys[i]) / (y1 - y0) : 0.5) * h;
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px, py);
    pts += buf;
  }
  return std::string("<polyline fill=\"none\" ") + style + " points=\"" + pts + "\"/>\n";
}

std::string series(const char* id, const std::vector<double>& xs, const std::vector<double>& ys) {
  std::string s = std::string("<desc id=\"") + id + "\">";
  char buf[64];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.0f:%.17g ", xs[i], ys[i]);
    s += buf;
  }
  return s + "</desc>\n";
}

}  // namespace

void emit_plot(const std::filesystem::path& metrics_path, const std::filesystem::path& svg_path,
               double window_fraction) {
  const auto rows = read_metrics(metrics_path);
  if (rows.empty()) throw InvalidInput("metrics file has no rows: " + metrics_path.string());
  std::vector<double> xs, raw;
  for (const auto& r : rows) {
    xs.push_back(static_cast<double>(r.iteration));
    raw.push_back(r.train_return);
  }
  const int window = smoothing_window(raw.size(), window_fraction);
  const auto smooth = moving_average(raw, window);
  const auto [ymin, ymax] = std::minmax_element(raw.begin(), raw.end());
  const double x0 = xs.front(), x1 = xs.back();

  char buf[256];
  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"470\" "
      "viewBox=\"0 0 800 470\">\n<rect width=\"800\" height=\"470\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"60\" y=\"450\" font-size=\"12\">iterations %.0f..%.0f, "
                "return %.4g..%.4g, window %d episodes</text>\n",
                x0, x1, *ymin, *ymax, window);
  svg += buf;
  svg += "<line x1=\"60\" y1=\"420\" x2=\"780\" y2=\"420\" stroke=\"black\"/>\n"
         "<line x1=\"60\" y1=\"20\" x2=\"60\" y2=\"420\" stroke=\"black\"/>\n";
  svg += polyline(xs, raw, x0, x1, *ymin, *ymax, "stroke=\"#bbbbbb\" stroke-width=\"1\"");
  svg += polyline(xs, smooth, x0, x1, *ymin, *ymax, "stroke=\"#1f4e9c\" stroke-width=\"2\"");
  svg += series("raw", xs, raw);
  svg += series("smoothed", xs, smooth);
  svg += "</svg>\n";
  write_file_atomic(svg_path, svg);
}

}  // namespace cgrl
