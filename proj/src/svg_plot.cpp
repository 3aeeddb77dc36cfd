#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mpsych/error.hpp"
#include "table_io.hpp"

namespace mpsych::report::svg {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                    "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

const char* colour(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof *kPalette)]; }

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish(bool include_zero) {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (include_zero) lo = std::min(lo, 0.0), hi = std::max(hi, 0.0);
    if (hi - lo < 1e-12) hi = lo + 1;
    const double pad = 0.05 * (hi - lo);
    hi += pad;
    if (!(include_zero && lo == 0.0)) lo -= pad;
  }
};

class Canvas {
 public:
  Canvas(const std::string& title, const std::string& x_label, const std::string& y_label) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << esc(title) << "</text>\n"
        << "<text x=\"" << kLeft + (kWidth - kLeft - kRight) / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\">" << esc(x_label) << "</text>\n"
        << "<text transform=\"translate(16," << kTop + (kHeight - kTop - kBottom) / 2
        << ") rotate(-90)\" text-anchor=\"middle\">" << esc(y_label) << "</text>\n";
  }

  void y_axis(const Range& r) {
    y_ = r;
    line(kLeft, kTop, kLeft, kHeight - kBottom, "black");
    line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom, "black");
    for (int k = 0; k <= 4; ++k) {
      const double v = r.lo + (r.hi - r.lo) * k / 4.0;
      const double y = py(v);
      line(kLeft - 4, y, kLeft, y, "black");
      text(kLeft - 6, y + 4, detail::num(std::round(v * 1000) / 1000), "end");
    }
    if (r.lo < 0 && r.hi > 0) line(kLeft, py(0), kWidth - kRight, py(0), "#999");
  }

  double py(double v) const {
    return kTop + (kHeight - kTop - kBottom) * (1.0 - (v - y_.lo) / (y_.hi - y_.lo));
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0) {
    os_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
        << "\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill) {
    os_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
        << "\" fill=\"" << fill << "\"/>\n";
  }

  void circle(double x, double y, const std::string& fill) {
    os_ << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3.5\" fill=\"" << fill
        << "\" fill-opacity=\"0.8\"/>\n";
  }

  void text(double x, double y, const std::string& s, const char* anchor = "start") {
    os_ << "<text x=\"" << x << "\" y=\"" << y << "\" text-anchor=\"" << anchor << "\">"
        << esc(s) << "</text>\n";
  }

  void legend(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double y = kTop + 18.0 * static_cast<double>(i);
      rect(kWidth - kRight + 12, y, 12, 12, colour(i));
      text(kWidth - kRight + 30, y + 10, names[i]);
    }
  }

  void save(const std::filesystem::path& path) {
    os_ << "</svg>\n";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << os_.str();
  }

 private:
  std::ostringstream os_;
  Range y_;
};

constexpr double plot_width() { return kWidth - kLeft - kRight; }

}  // namespace

void bar_chart(const std::filesystem::path& path, const std::string& title,
               const std::string& y_label, const std::vector<std::string>& categories,
               const std::vector<BarSeries>& series) {
  Canvas c(title, "", y_label);
  Range r;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double e = i < s.errors.size() ? s.errors[i] : 0.0;
      r.add(s.values[i] - e);
      r.add(s.values[i] + e);
    }
  }
  r.finish(true);
  c.y_axis(r);
  const double group_w = plot_width() / std::max<std::size_t>(categories.size(), 1);
  const double bar_w = 0.8 * group_w / std::max<std::size_t>(series.size(), 1);
  for (std::size_t g = 0; g < categories.size(); ++g) {
    const double gx = kLeft + group_w * static_cast<double>(g) + 0.1 * group_w;
    c.text(kLeft + group_w * (static_cast<double>(g) + 0.5), kHeight - kBottom + 16, categories[g],
           "middle");
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (g >= series[s].values.size() || !std::isfinite(series[s].values[g])) continue;
      const double v = series[s].values[g];
      const double x = gx + bar_w * static_cast<double>(s);
      const double y0 = c.py(std::max(v, 0.0)), y1 = c.py(std::min(v, 0.0));
      c.rect(x, y0, bar_w * 0.95, std::max(y1 - y0, 0.5), colour(s));
      if (g < series[s].errors.size() && std::isfinite(series[s].errors[g])) {
        const double e = series[s].errors[g];
        const double mx = x + bar_w * 0.475;
        c.line(mx, c.py(v - e), mx, c.py(v + e), "black");
      }
    }
  }
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  c.legend(names);
  c.save(path);
}

void line_chart(const std::filesystem::path& path, const std::string& title,
                const std::string& x_label, const std::string& y_label,
                const std::vector<LineSeries>& series) {
  Canvas c(title, x_label, y_label);
  Range rx, ry;
  for (const auto& s : series) {
    for (double v : s.x) rx.add(v);
    for (double v : s.y) ry.add(v);
  }
  rx.finish(false);
  ry.finish(false);
  c.y_axis(ry);
  const auto px = [&](double v) { return kLeft + plot_width() * (v - rx.lo) / (rx.hi - rx.lo); };
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ls = series[s];
    for (std::size_t i = 0; i + 1 < ls.x.size(); ++i) {
      c.line(px(ls.x[i]), c.py(ls.y[i]), px(ls.x[i + 1]), c.py(ls.y[i + 1]), colour(s), 2.0);
    }
    for (std::size_t i = 0; i < ls.x.size(); ++i) c.circle(px(ls.x[i]), c.py(ls.y[i]), colour(s));
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = rx.lo + (rx.hi - rx.lo) * k / 4.0;
    c.text(px(v), kHeight - kBottom + 16, detail::num(std::round(v * 100) / 100), "middle");
  }
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  c.legend(names);
  c.save(path);
}

void scatter(const std::filesystem::path& path, const std::string& title,
             const std::string& x_label, const std::string& y_label, const std::vector<double>& x,
             const std::vector<double>& y) {
  Canvas c(title, x_label, y_label);
  Range rx, ry;
  for (double v : x) rx.add(v);
  for (double v : y) ry.add(v);
  rx.finish(false);
  ry.finish(false);
  c.y_axis(ry);
  const auto px = [&](double v) { return kLeft + plot_width() * (v - rx.lo) / (rx.hi - rx.lo); };
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (std::isfinite(x[i]) && std::isfinite(y[i])) c.circle(px(x[i]), c.py(y[i]), colour(0));
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = rx.lo + (rx.hi - rx.lo) * k / 4.0;
    c.text(px(v), kHeight - kBottom + 16, detail::num(std::round(v * 100) / 100), "middle");
  }
  c.save(path);
}

}  // namespace mpsych::report::svg
