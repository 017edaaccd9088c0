#pragma once

#include <string>
#include <vector>

namespace straw {

// Minimal SVG document builder; enough for heatmap grids and line charts.
class SvgDoc {
 public:
  SvgDoc(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "");
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0);
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double width = 1.5);
  void text(double x, double y, const std::string& content, int font_size = 12,
            const std::string& fill = "#000");

  std::string str() const;
  void write(const std::string& path) const;

  // 0..1 -> white..red ramp used by the replan heatmaps
  static std::string heat_color(double v);

 private:
  double w_, h_;
  std::string body_;
};

}  // namespace straw
