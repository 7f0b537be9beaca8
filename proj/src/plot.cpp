#include "qtopo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "qtopo/sweep.hpp"

namespace qtopo {

PlotKind plot_kind_from_string(const std::string& name) {
  if (name == "solvability") return PlotKind::solvability;
  if (name == "error") return PlotKind::error;
  throw std::invalid_argument("unknown plot kind '" + name + "' (expected solvability or error)");
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader) {
    throw std::invalid_argument(path.string() + ": not a sweep CSV (unexpected header)");
  }
  std::vector<SweepRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": expected 10 fields");
    }
    try {
      SweepRow r;
      r.d = std::stoul(cells[0]);
      r.tau = std::stod(cells[1]);
      r.n_tilde = std::stoul(cells[2]);
      r.solvability_mean = std::stod(cells[4]);
      r.eps_median = cells[5] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(cells[5]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 180.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 50.0;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                               "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::string render_plot(const std::vector<SweepRow>& rows, PlotKind kind) {
  if (rows.empty()) throw std::invalid_argument("plot: no data rows");
  const bool log_y = kind == PlotKind::error;

  std::map<std::pair<double, std::size_t>, std::vector<std::pair<double, double>>> series;
  for (const auto& r : rows) {
    const double y = log_y ? r.eps_median : r.solvability_mean;
    if (!std::isfinite(y) || (log_y && y <= 0.0)) continue;
    series[{r.tau, r.n_tilde}].emplace_back(static_cast<double>(r.d), log_y ? std::log10(y) : y);
  }
  if (series.empty()) throw std::invalid_argument("plot: no finite values to plot");

  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  double y_lo = x_lo;
  double y_hi = -x_lo;
  for (auto& [key, pts] : series) {
    std::sort(pts.begin(), pts.end());
    for (const auto& [x, y] : pts) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  if (x_hi == x_lo) {
    x_lo -= 1.0;
    x_hi += 1.0;
  }
  if (log_y) {
    y_lo = std::floor(y_lo);
    y_hi = std::ceil(y_hi);
    if (y_hi == y_lo) y_hi += 1.0;
  } else {
    y_lo = 0.0;
    y_hi = 1.0;
  }

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto sy = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw)
      << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  // x ticks at integer d, thinned to at most ~12 labels.
  const auto span = static_cast<long>(std::llround(x_hi - x_lo));
  const long step = std::max(1L, (span + 11) / 12);
  for (long x = static_cast<long>(std::ceil(x_lo)); x <= static_cast<long>(x_hi); x += step) {
    const double px = sx(static_cast<double>(x));
    svg << "<line x1=\"" << num(px) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px)
        << "\" y2=\"" << num(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(px) << "\" y=\"" << num(kTop + ph + 18)
        << "\" text-anchor=\"middle\">" << x << "</text>\n";
  }
  // y ticks: quarters for solvability, decades for epsilon.
  std::vector<double> yticks;
  if (log_y) {
    for (double y = y_lo; y <= y_hi; y += 1.0) yticks.push_back(y);
  } else {
    for (int i = 0; i <= 4; ++i) yticks.push_back(0.25 * i);
  }
  for (double y : yticks) {
    const double py = sy(y);
    svg << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py) << "\" x2=\"" << num(kLeft + pw)
        << "\" y2=\"" << num(py) << "\" stroke=\"#dddddd\"/>\n";
    const std::string text = log_y ? "1e" + label_num(y) : label_num(y);
    svg << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">"
        << text << "</text>\n";
  }
  svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 10)
      << "\" text-anchor=\"middle\">network size d</text>\n";
  const std::string ylabel = log_y ? "median relative error" : "mean solvability rate";
  svg << "<text x=\"16\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num(kTop + ph / 2) << ")\">" << ylabel << "</text>\n";

  std::size_t idx = 0;
  for (const auto& [key, pts] : series) {
    const char* color = kColors[idx % (sizeof kColors / sizeof kColors[0])];
    if (pts.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i) {
        svg << (i ? " " : "") << num(sx(pts[i].first)) << ',' << num(sy(pts[i].second));
      }
      svg << "\"/>\n";
    }
    for (const auto& [x, y] : pts) {
      svg << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y)) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = kTop + 10.0 + 18.0 * static_cast<double>(idx);
    const double lx = kLeft + pw + 15.0;
    svg << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 20) << "\" y2=\""
        << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(lx + 26) << "\" y=\"" << num(ly + 4) << "\">tau=" << label_num(key.first)
        << ", n=" << key.second << "</text>\n";
    ++idx;
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const std::filesystem::path& csv, PlotKind kind, const std::filesystem::path& svg) {
  const std::string doc = render_plot(read_sweep_csv(csv), kind);
  std::ofstream out(svg, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + svg.string());
  out << doc;
}

}  // namespace qtopo
