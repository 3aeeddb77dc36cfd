#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "mpsych/error.hpp"

namespace mpsych::report::detail {

inline std::string num(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string num(std::size_t v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }

inline std::string quote(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

class Csv {
 public:
  Csv(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot write " + path.string());
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(cells[i]);
    }
    out_ << '\n';
    if (!out_) throw IoError("failed writing " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

}  // namespace mpsych::report::detail
