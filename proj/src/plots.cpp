#include "gwl/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gwl::plots {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::string escape(const std::string& s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  if (std::abs(v) >= 100 || v == std::floor(v)) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.2f", v);
  }
  return buf;
}

// Roughly five ticks at 1/2/5 multiples.
double nice_step(double span) {
  if (span <= 0) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

constexpr double kPanelW = 420, kPanelH = 340, kLeft = 60, kRight = 15, kTop = 30, kBottom = 45;

}  // namespace

std::vector<CurveRow> read_curves_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::vector<std::string> header;
  std::vector<CurveRow> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv(line);
    if (header.empty()) {
      header = cells;
      continue;
    }
    if (cells.size() < 6) throw std::runtime_error("short row at line " + std::to_string(line_no));
    auto col = [&](const char* name) -> const std::string& {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw std::runtime_error(std::string("curves CSV lacks column ") + name);
      return cells.at(static_cast<std::size_t>(it - header.begin()));
    };
    try {
      rows.push_back({col("condition"), std::stoi(col("fold")), std::stoi(col("step")), std::stoi(col("instances")),
                      std::stod(col("accuracy")), std::stod(col("cum_cost"))});
    } catch (const std::logic_error& e) {
      throw std::runtime_error("bad number at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (rows.empty()) throw std::runtime_error(path.string() + " has no curve rows");
  return rows;
}

MeanCurves mean_curves(const std::vector<CurveRow>& rows) {
  MeanCurves out;
  // condition -> step -> (sums, count)
  std::map<std::string, std::map<int, std::array<double, 4>>> acc;
  for (const auto& r : rows) {
    if (std::find(out.conditions.begin(), out.conditions.end(), r.condition) == out.conditions.end()) {
      out.conditions.push_back(r.condition);
    }
    auto& cell = acc[r.condition][r.step];
    cell[0] += r.instances;
    cell[1] += r.accuracy;
    cell[2] += r.cum_cost;
    cell[3] += 1.0;
  }
  for (const auto& c : out.conditions) {
    std::vector<double> xs, as, cs;
    for (const auto& [step, cell] : acc[c]) {
      xs.push_back(cell[0] / cell[3]);
      as.push_back(cell[1] / cell[3]);
      cs.push_back(cell[2] / cell[3]);
    }
    out.instances.push_back(xs);
    out.accuracy.push_back(as);
    out.cost.push_back(cs);
  }
  return out;
}

std::vector<Panel> standard_panels(const MeanCurves& m) {
  Panel acc{"Accuracy", "training instances", "accuracy", {}};
  Panel cost{"Tutoring cost", "training instances", "cumulative cost", {}};
  Panel both{"Accuracy per cost", "cumulative cost", "accuracy", {}};
  for (std::size_t i = 0; i < m.conditions.size(); ++i) {
    acc.series.push_back({m.conditions[i], m.instances[i], m.accuracy[i]});
    cost.series.push_back({m.conditions[i], m.instances[i], m.cost[i]});
    both.series.push_back({m.conditions[i], m.cost[i], m.accuracy[i]});
  }
  return {acc, cost, both};
}

std::string render_svg(const std::vector<Panel>& panels) {
  std::ostringstream o;
  const double legend_w = 170;
  const double width = kPanelW * static_cast<double>(panels.size()) + legend_w;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(kPanelH)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const double ox = kPanelW * static_cast<double>(p);
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    for (const auto& s : panel.series) {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (first) {
          x0 = x1 = s.x[i];
          y0 = y1 = s.y[i];
          first = false;
        }
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, s.y[i]);
        y1 = std::max(y1, s.y[i]);
      }
    }
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) y1 = y0 + 1;
    const double xs = nice_step(x1 - x0), ys = nice_step(y1 - y0);
    x0 = std::floor(x0 / xs) * xs;
    x1 = std::ceil(x1 / xs) * xs;
    y0 = std::floor(y0 / ys) * ys;
    y1 = std::ceil(y1 / ys) * ys;
    const double pw = kPanelW - kLeft - kRight, ph = kPanelH - kTop - kBottom;
    auto px = [&](double x) { return ox + kLeft + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };
    o << "<text x=\"" << num(ox + kLeft + pw / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
      << escape(panel.title) << "</text>\n";
    o << "<rect x=\"" << num(ox + kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\""
      << num(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (double t = x0; t <= x1 + xs * 1e-9; t += xs) {
      o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(t)) << "\" y2=\""
        << num(kTop + ph + 4) << "\" stroke=\"#333\"/>";
      o << "<text x=\"" << num(px(t)) << "\" y=\"" << num(kTop + ph + 16) << "\" text-anchor=\"middle\">"
        << tick_label(t) << "</text>\n";
    }
    for (double t = y0; t <= y1 + ys * 1e-9; t += ys) {
      o << "<line x1=\"" << num(ox + kLeft - 4) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(ox + kLeft)
        << "\" y2=\"" << num(py(t)) << "\" stroke=\"#333\"/>";
      o << "<text x=\"" << num(ox + kLeft - 6) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">"
        << tick_label(t) << "</text>\n";
    }
    o << "<text x=\"" << num(ox + kLeft + pw / 2) << "\" y=\"" << num(kPanelH - 8)
      << "\" text-anchor=\"middle\">" << escape(panel.x_label) << "</text>\n";
    o << "<text transform=\"translate(" << num(ox + 14) << "," << num(kTop + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(panel.y_label) << "</text>\n";
    for (std::size_t i = 0; i < panel.series.size(); ++i) {
      const auto& s = panel.series[i];
      o << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[i % std::size(kPalette)]
        << "\" points=\"";
      for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) o << num(px(s.x[k])) << ',' << num(py(s.y[k])) << ' ';
      o << "\"/>\n";
    }
  }
  if (!panels.empty()) {
    const double lx = kPanelW * static_cast<double>(panels.size()) + 10;
    for (std::size_t i = 0; i < panels.front().series.size(); ++i) {
      const double y = kTop + 10 + 18 * static_cast<double>(i);
      o << "<line x1=\"" << num(lx) << "\" y1=\"" << num(y) << "\" x2=\"" << num(lx + 20) << "\" y2=\"" << num(y)
        << "\" stroke-width=\"2\" stroke=\"" << kPalette[i % std::size(kPalette)] << "\"/>";
      o << "<text x=\"" << num(lx + 26) << "\" y=\"" << num(y + 4) << "\">" << escape(panels.front().series[i].name)
        << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

void write_svg(const std::filesystem::path& path, const std::vector<Panel>& panels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render_svg(panels);
}

}  // namespace gwl::plots
