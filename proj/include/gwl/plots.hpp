// Curve CSV reading and SVG line plots (accuracy vs instances, cost vs
// instances, accuracy vs cost), hand-written SVG with no plotting library.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace gwl::plots {

struct CurveRow {
  std::string condition;
  int fold = 0;
  int step = 0;
  int instances = 0;
  double accuracy = 0.0;
  double cum_cost = 0.0;
};

// Reads the curves CSV written by the experiment command. Lines starting
// with '#' are comments.
std::vector<CurveRow> read_curves_csv(const std::filesystem::path& path);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Fold-averaged series per condition, in first-seen order.
struct MeanCurves {
  std::vector<std::string> conditions;
  std::vector<std::vector<double>> instances, accuracy, cost;
};

MeanCurves mean_curves(const std::vector<CurveRow>& rows);

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

// One SVG document with the panels laid out left to right.
std::string render_svg(const std::vector<Panel>& panels);

std::vector<Panel> standard_panels(const MeanCurves& curves);

void write_svg(const std::filesystem::path& path, const std::vector<Panel>& panels);

}  // namespace gwl::plots
