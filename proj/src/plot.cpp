#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hetvr/harness.hpp"

namespace hetvr {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string escape_xml(const std::string& s) {
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

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Tick label for an axis value, trimmed.
std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::vector<PlotSeries> read_trace_series(const std::vector<std::filesystem::path>& files) {
  if (files.empty()) throw ConfigError("plot: at least one trace file required");
  std::vector<PlotSeries> series;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open trace file");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty trace file");
    const auto header = split_csv_line(line);
    auto column = [&](const std::string& name) -> long {
      auto it = std::find(header.begin(), header.end(), name);
      return it == header.end() ? -1 : static_cast<long>(it - header.begin());
    };
    const long pass_col = column("pass");
    const long gap_col = column("gap");
    const long solver_col = column("solver");
    if (pass_col < 0 || gap_col < 0) {
      throw ConfigError(path.string() + ": header needs 'pass' and 'gap' columns");
    }
    const std::string stem = path.stem().string();
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      const auto need = static_cast<std::size_t>(std::max({pass_col, gap_col, solver_col})) + 1;
      if (cells.size() < need) {
        throw ConfigError(path.string() + ": line " + std::to_string(lineno) + ": too few columns");
      }
      std::string label = solver_col >= 0 ? cells[solver_col] : stem;
      if (files.size() > 1 && solver_col >= 0) label = stem + "/" + label;
      auto it = std::find_if(series.begin(), series.end(),
                             [&](const PlotSeries& s) { return s.label == label; });
      if (it == series.end()) {
        series.push_back({label, {}, {}});
        it = std::prev(series.end());
      }
      try {
        it->passes.push_back(std::stod(cells[pass_col]));
        it->gaps.push_back(std::stod(cells[gap_col]));
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ": line " + std::to_string(lineno) +
                          ": pass/gap are not numbers");
      }
    }
  }
  return series;
}

std::string render_svg(const std::vector<PlotSeries>& series, const std::string& title) {
  std::size_t points = 0;
  for (const auto& s : series) points += s.passes.size();
  if (series.empty() || points == 0) throw Error("plot: no trace points to draw");

  const double width = 760.0;
  const double height = 480.0;
  const double left = 70.0;
  const double right = 190.0;
  const double top = 40.0;
  const double bottom = 50.0;

  double x_max = 0.0;
  double y_lo = std::numeric_limits<double>::infinity();
  double y_hi = -std::numeric_limits<double>::infinity();
  auto log_gap = [](double g) {
    // exact zeros and rounding-level negatives sit on the floor
    return std::log10(std::max(std::isfinite(g) ? g : kPlotGapFloor, kPlotGapFloor));
  };
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.passes.size(); ++k) {
      x_max = std::max(x_max, s.passes[k]);
      const double y = log_gap(s.gaps[k]);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  if (x_max <= 0.0) x_max = 1.0;
  y_lo = std::floor(y_lo);
  y_hi = std::ceil(y_hi);
  if (y_hi <= y_lo) y_hi = y_lo + 1.0;

  const double pw = width - left - right;
  const double ph = height - top - bottom;
  auto px = [&](double x) { return left + pw * x / x_max; };
  auto py = [&](double y) { return top + ph * (y_hi - y) / (y_hi - y_lo); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    svg << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << escape_xml(title) << "</text>\n";
  }
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  const double y_step = std::max(1.0, std::ceil((y_hi - y_lo) / 10.0));
  for (double y = y_lo; y <= y_hi + 1e-9; y += y_step) {
    svg << "<line x1=\"" << left << "\" x2=\"" << fmt(left + pw) << "\" y1=\"" << fmt(py(y))
        << "\" y2=\"" << fmt(py(y)) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py(y) + 4)
        << "\" text-anchor=\"end\">1e" << tick(y) << "</text>\n";
  }
  for (int k = 0; k <= 5; ++k) {
    const double x = x_max * k / 5.0;
    svg << "<text x=\"" << fmt(px(x)) << "\" y=\"" << fmt(top + ph + 18)
        << "\" text-anchor=\"middle\">" << tick(x) << "</text>\n";
  }
  svg << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(height - 10)
      << "\" text-anchor=\"middle\">effective passes</text>\n";
  svg << "<text x=\"16\" y=\"" << fmt(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fmt(top + ph / 2) << ")\">objective gap</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % std::size(palette)];
    const auto& ser = series[s];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < ser.passes.size(); ++k) {
      if (k > 0) svg << ' ';
      svg << fmt(px(ser.passes[k])) << ',' << fmt(py(log_gap(ser.gaps[k])));
    }
    svg << "\"/>\n";
    const double ly = top + 14.0 + 18.0 * static_cast<double>(s);
    svg << "<line x1=\"" << fmt(left + pw + 12) << "\" x2=\"" << fmt(left + pw + 36) << "\" y1=\""
        << fmt(ly) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text class=\"legend\" x=\"" << fmt(left + pw + 42) << "\" y=\"" << fmt(ly + 4) << "\">"
        << escape_xml(ser.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace hetvr
