#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mpsych::report::svg {

struct BarSeries {
  std::string name;
  std::vector<double> values;
  std::vector<double> errors;  // half-widths; empty for none
};

// Grouped bars: one group per category label, one bar per series.
void bar_chart(const std::filesystem::path& path, const std::string& title,
               const std::string& y_label, const std::vector<std::string>& categories,
               const std::vector<BarSeries>& series);

struct LineSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

void line_chart(const std::filesystem::path& path, const std::string& title,
                const std::string& x_label, const std::string& y_label,
                const std::vector<LineSeries>& series);

void scatter(const std::filesystem::path& path, const std::string& title,
             const std::string& x_label, const std::string& y_label, const std::vector<double>& x,
             const std::vector<double>& y);

}  // namespace mpsych::report::svg
