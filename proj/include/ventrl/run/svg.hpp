#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "ventrl/core/format.hpp"

namespace ventrl::run {

// Minimal static SVG output: enough for bar charts and line plots over a
// single axis frame. Deterministic text, no styling beyond flat colors.
class SvgCanvas {
 public:
  SvgCanvas(int width, int height) : width_(width), height_(height) {
    body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
          << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    body_ << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill) {
    body_ << "<rect x=\"" << format_g9(x) << "\" y=\"" << format_g9(y) << "\" width=\""
          << format_g9(w) << "\" height=\"" << format_g9(h) << "\" fill=\"" << fill << "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0) {
    body_ << "<line x1=\"" << format_g9(x1) << "\" y1=\"" << format_g9(y1) << "\" x2=\""
          << format_g9(x2) << "\" y2=\"" << format_g9(y2) << "\" stroke=\"" << stroke
          << "\" stroke-width=\"" << format_g9(width) << "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : pts) body_ << format_g9(x) << "," << format_g9(y) << " ";
    body_ << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 11,
            const std::string& fill = "#333") {
    body_ << "<text x=\"" << format_g9(x) << "\" y=\"" << format_g9(y) << "\" font-size=\"" << size
          << "\" font-family=\"sans-serif\" fill=\"" << fill << "\">" << s << "</text>\n";
  }

  std::string finish() {
    body_ << "</svg>\n";
    return body_.str();
  }

 private:
  int width_, height_;
  std::ostringstream body_;
};

inline const char* series_color(std::size_t i) {
  static const char* colors[] = {"#4878d0", "#ee854a", "#6acc64", "#d65f5f",
                                 "#956cb4", "#8c613c", "#dc7ec0", "#797979"};
  return colors[i % 8];
}

}  // namespace ventrl::run
