#include "sameside/plot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "sameside/error.hpp"
#include "util.hpp"

namespace sameside {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 160;  // room for the legend
constexpr double kTop = 40;
constexpr double kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string num(double v) { return detail::fixed(v, 2); }

double nice_step(double span, int target_ticks) {
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double nice = norm < 1.5 ? 1.0 : norm < 3.0 ? 2.0 : norm < 7.0 ? 5.0 : 10.0;
  return nice * mag;
}

struct YAxis {
  double lo, hi, step;
  int decimals;
};

YAxis y_axis(double lo, double hi, bool from_zero) {
  if (from_zero) lo = std::min(lo, 0.0);
  if (hi - lo < 1e-12) {
    const double pad = std::max(std::abs(hi) * 0.1, 1e-3);
    lo -= pad;
    hi += pad;
  }
  const double step = nice_step(hi - lo, 5);
  YAxis axis{std::floor(lo / step) * step, std::ceil(hi / step) * step, step, 0};
  axis.decimals = std::max(0, static_cast<int>(-std::floor(std::log10(step) + 1e-9)));
  return axis;
}

std::string x_tick_label(double x) {
  if (x == std::floor(x) && std::abs(x) < 1e15) return std::to_string(static_cast<long long>(x));
  return detail::shortest(x);
}

void open_svg(std::ostringstream& out, const PlotLabels& labels) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  if (!labels.title.empty()) {
    out << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(labels.title) << "</text>\n";
  }
}

void draw_frame(std::ostringstream& out, const YAxis& axis, const PlotLabels& labels) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  out << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y0) << "\"/>\n"
      << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y1) << "\"/>\n"
      << "</g>\n";
  out << "<g class=\"y-ticks\">\n";
  const int n_ticks = static_cast<int>(std::lround((axis.hi - axis.lo) / axis.step));
  for (int i = 0; i <= n_ticks; ++i) {
    const double value = axis.lo + i * axis.step;
    const double y = y0 - (value - axis.lo) / (axis.hi - axis.lo) * (y0 - y1);
    out << "<line x1=\"" << num(x0 - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y)
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << num(x0 - 7) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
        << detail::fixed(value, axis.decimals) << "</text>\n";
  }
  out << "</g>\n";
  if (!labels.x_label.empty()) {
    out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 15) << "\" text-anchor=\"middle\">"
        << escape(labels.x_label) << "</text>\n";
  }
  if (!labels.y_label.empty()) {
    out << "<text x=\"18\" y=\"" << num((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << num((y0 + y1) / 2) << ")\">" << escape(labels.y_label) << "</text>\n";
  }
}

double y_pixel(const YAxis& axis, double value) {
  const double y0 = kHeight - kBottom, y1 = kTop;
  return y0 - (value - axis.lo) / (axis.hi - axis.lo) * (y0 - y1);
}

void check_finite(const std::vector<Series>& series) {
  if (series.empty()) throw Error(ErrorCode::kInvalidArgument, "plot: no series given");
  for (const auto& s : series) {
    if (s.points.empty()) throw Error(ErrorCode::kInvalidArgument, "plot: series '" + s.name + "' is empty");
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw Error(ErrorCode::kInvalidArgument, "plot: series '" + s.name + "' has a non-finite value");
      }
    }
  }
}

std::string line_plot(const std::vector<Series>& series, const PlotLabels& labels) {
  std::set<double> xs;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      xs.insert(x);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  const YAxis axis = y_axis(lo, hi, false);
  std::map<double, double> x_pos;
  const double plot_w = kWidth - kRight - kLeft;
  std::size_t k = 0;
  for (double x : xs) {
    x_pos[x] = kLeft + plot_w * (static_cast<double>(k) + 0.5) / static_cast<double>(xs.size());
    ++k;
  }

  std::ostringstream out;
  open_svg(out, labels);
  draw_frame(out, axis, labels);
  out << "<g class=\"x-ticks\">\n";
  for (const auto& [x, px] : x_pos) {
    const double y0 = kHeight - kBottom;
    out << "<line x1=\"" << num(px) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(px) << "\" y2=\"" << num(y0 + 4)
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << num(px) << "\" y=\"" << num(y0 + 18) << "\" text-anchor=\"middle\">" << x_tick_label(x)
        << "</text>\n";
  }
  out << "</g>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    auto pts = series[i].points;
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    out << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t p = 0; p < pts.size(); ++p) {
      out << (p ? " " : "") << num(x_pos[pts[p].first]) << ',' << num(y_pixel(axis, pts[p].second));
    }
    out << "\"/>\n";
    for (const auto& [x, y] : pts) {
      out << "<circle cx=\"" << num(x_pos[x]) << "\" cy=\"" << num(y_pixel(axis, y)) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
  }
  out << "<g class=\"legend\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double lx = kWidth - kRight + 15;
    const double ly = kTop + 10 + 20.0 * static_cast<double>(i);
    out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 20) << "\" y2=\"" << num(ly)
        << "\" stroke=\"" << kPalette[i % std::size(kPalette)] << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << num(lx + 26) << "\" y=\"" << num(ly + 4) << "\">" << escape(series[i].name) << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

std::string bar_chart(const Series& s, const PlotLabels& labels) {
  double hi = -INFINITY, lo = INFINITY;
  for (const auto& [x, y] : s.points) {
    hi = std::max(hi, y);
    lo = std::min(lo, y);
  }
  const YAxis axis = y_axis(lo, hi, true);
  const double plot_w = kWidth - kRight - kLeft;
  const double slot = plot_w / static_cast<double>(s.points.size());
  // Thin out x labels so they do not overlap.
  const std::size_t label_every = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(40.0 / slot)));

  std::ostringstream out;
  open_svg(out, labels);
  draw_frame(out, axis, labels);
  out << "<g class=\"bars\" fill=\"" << kPalette[0] << "\">\n";
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const double x = kLeft + slot * static_cast<double>(i);
    const double top = y_pixel(axis, s.points[i].second);
    const double base = y_pixel(axis, std::max(axis.lo, 0.0));
    out << "<rect class=\"bar\" x=\"" << num(x + slot * 0.1) << "\" y=\"" << num(std::min(top, base)) << "\" width=\""
        << num(slot * 0.8) << "\" height=\"" << num(std::abs(base - top)) << "\"/>\n";
  }
  out << "</g>\n<g class=\"x-ticks\">\n";
  for (std::size_t i = 0; i < s.points.size(); i += label_every) {
    const double cx = kLeft + slot * (static_cast<double>(i) + 0.5);
    out << "<text x=\"" << num(cx) << "\" y=\"" << num(kHeight - kBottom + 18) << "\" text-anchor=\"middle\">"
        << x_tick_label(s.points[i].first) << "</text>\n";
  }
  out << "</g>\n<g class=\"legend\">\n"
      << "<rect x=\"" << num(kWidth - kRight + 15) << "\" y=\"" << num(kTop + 4) << "\" width=\"12\" height=\"12\" fill=\""
      << kPalette[0] << "\"/>\n"
      << "<text x=\"" << num(kWidth - kRight + 33) << "\" y=\"" << num(kTop + 14) << "\">" << escape(s.name)
      << "</text>\n</g>\n</svg>\n";
  return out.str();
}

}  // namespace

std::string emit_plot(const std::vector<Series>& series, PlotKind kind, const PlotLabels& labels) {
  check_finite(series);
  return kind == PlotKind::kLine ? line_plot(series, labels) : bar_chart(series.front(), labels);
}

Series histogram_series(const LengthHistogram& hist, std::size_t max_start) {
  Series s{"pairs", {}};
  for (const auto& [index, count] : hist.buckets) {
    const std::size_t start = index * hist.bucket_width;
    if (max_start != 0 && start >= max_start) continue;
    s.points.emplace_back(static_cast<double>(start), static_cast<double>(count));
  }
  return s;
}

std::vector<Series> accuracy_series(const ResultsTable& table) {
  std::vector<Series> out;
  for (const auto& row : table.rows) {
    if (row.failed) continue;
    const std::string& name = row.spec.model_kind;
    auto it = std::find_if(out.begin(), out.end(), [&](const Series& s) { return s.name == name; });
    if (it == out.end()) it = out.insert(out.end(), Series{name, {}});
    it->points.emplace_back(static_cast<double>(row.spec.max_seq_len), row.metrics.accuracy);
  }
  return out;
}

}  // namespace sameside
