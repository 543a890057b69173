#include "hympi/chart.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "hympi/errors.hpp"

namespace hympi::chart {

namespace {

constexpr std::string_view kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                         "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::optional<double> number(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::string escape(std::string_view s) {
  std::string out;
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

std::string num(double v) { return fmt::format("{:.2f}", v); }

std::string label(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) return fmt::format("{:.0f}", v);
  return fmt::format("{:.3g}", v);
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

}  // namespace

void emit_chart(const bench::Table& table, std::string_view x, std::string_view y,
                std::string_view series, std::ostream& out, const ChartOptions& opts) {
  const std::size_t xi = table.column(x);
  const std::size_t yi = table.column(y);
  std::vector<std::size_t> si;
  for (std::size_t pos = 0;;) {
    const auto plus = series.find('+', pos);
    si.push_back(table.column(series.substr(pos, plus == std::string_view::npos ? plus : plus - pos)));
    if (plus == std::string_view::npos) break;
    pos = plus + 1;
  }

  std::vector<Series> lines;
  for (const auto& row : table.rows) {
    const auto xv = number(row.at(xi));
    const auto yv = number(row.at(yi));
    if (!xv || !yv) continue;
    std::string name;
    for (std::size_t c : si) name += (name.empty() ? "" : " ") + row.at(c);
    auto it = std::find_if(lines.begin(), lines.end(),
                           [&](const Series& s) { return s.name == name; });
    if (it == lines.end()) {
      lines.push_back({name, {}});
      it = std::prev(lines.end());
    }
    it->points.emplace_back(*xv, *yv);
  }
  for (auto& s : lines) std::stable_sort(s.points.begin(), s.points.end());

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : lines) {
    for (auto [px, py] : s.points) {
      if (!any) {
        xmin = xmax = px;
        ymax = py;
        any = true;
      }
      xmin = std::min(xmin, px);
      xmax = std::max(xmax, px);
      ymin = std::min(ymin, py);
      ymax = std::max(ymax, py);
    }
  }
  const bool log_x = any && xmin > 0 && xmax / xmin >= 16;
  auto xt = [&](double v) { return log_x ? std::log2(v) : v; };
  double x0 = xt(xmin), x1 = xt(xmax);
  if (x1 == x0) x1 = x0 + 1;
  if (ymax == ymin) ymax = ymin + 1;

  const double left = 80, right = 170, top = 40, bottom = 60;
  const double pw = opts.width - left - right;
  const double ph = opts.height - top - bottom;
  auto sx = [&](double v) { return left + (xt(v) - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return top + ph - (v - ymin) / (ymax - ymin) * ph; };

  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"11\">\n",
      opts.width, opts.height);
  out << fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", opts.width, opts.height);
  if (!opts.title.empty()) {
    out << fmt::format("<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                       num(left + pw / 2), escape(opts.title));
  }
  // Axes.
  out << fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
                     num(left), num(top), num(top + ph));
  out << fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n",
                     num(left), num(top + ph), num(left + pw));

  // Ticks: powers of two on a log axis, five even steps otherwise.
  std::vector<double> xticks;
  if (log_x) {
    const int lo = static_cast<int>(std::ceil(x0));
    const int hi = static_cast<int>(std::floor(x1));
    const int step = std::max(1, (hi - lo + 7) / 8);
    for (int e = lo; e <= hi; e += step) xticks.push_back(std::exp2(e));
  } else if (any) {
    for (int i = 0; i <= 4; ++i) xticks.push_back(xmin + (xmax - xmin) * i / 4.0);
  }
  for (double v : xticks) {
    const double px = sx(v);
    out << fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
                       num(px), num(top + ph), num(top + ph + 4));
    out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(px),
                       num(top + ph + 16), label(v));
  }
  if (any) {
    for (int i = 0; i <= 4; ++i) {
      const double v = ymin + (ymax - ymin) * i / 4.0;
      const double py = sy(v);
      out << fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n",
                         num(left - 4), num(py), num(left));
      out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(left - 6),
                         num(py + 4), label(v));
    }
  }
  out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}{}</text>\n",
                     num(left + pw / 2), num(opts.height - 15.0), escape(x),
                     log_x ? " (log2)" : "");
  out << fmt::format(
      "<text x=\"15\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {0})\">{1}</text>\n",
      num(top + ph / 2), escape(y));

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto color = kPalette[i % std::size(kPalette)];
    std::string pts;
    for (auto [px, py] : lines[i].points) {
      if (!pts.empty()) pts += ' ';
      pts += num(sx(px)) + "," + num(sy(py));
    }
    out << fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                       color, pts);
    const double ly = top + 10 + 16.0 * static_cast<double>(i);
    out << fmt::format(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
        num(left + pw + 12), num(ly), num(left + pw + 32), color);
    out << fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(left + pw + 36), num(ly + 4),
                       escape(lines[i].name));
  }
  out << "</svg>\n";
}

void emit_chart(const bench::Table& table, std::string_view x, std::string_view y,
                std::string_view series, const std::filesystem::path& path,
                const ChartOptions& opts) {
  // Column errors surface before the file is touched.
  std::ostringstream svg;
  emit_chart(table, x, y, series, svg, opts);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write chart file " + path.string());
  out << svg.str();
}

}  // namespace hympi::chart
