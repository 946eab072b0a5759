#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pmst::cli {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // non-finite values break the line
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool markers = false;
};

/// Minimal standalone SVG line chart with axes, ticks and a legend.
void write_svg(const Plot& plot, const std::filesystem::path& path);

}  // namespace pmst::cli
