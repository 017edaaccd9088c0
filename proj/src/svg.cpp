#include "straw/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "straw/common.hpp"

namespace straw {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

}  // namespace

SvgDoc::SvgDoc(double width, double height) : w_(width), h_(height) {}

void SvgDoc::rect(double x, double y, double w, double h, const std::string& fill,
                  const std::string& stroke) {
  body_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) +
           "\" height=\"" + fmt(h) + "\" fill=\"" + fill + "\"";
  if (!stroke.empty()) body_ += " stroke=\"" + stroke + "\"";
  body_ += "/>\n";
}

void SvgDoc::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                  double width) {
  body_ += "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" +
           fmt(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(width) + "\"/>\n";
}

void SvgDoc::polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                      double width) {
  if (pts.empty()) return;
  body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(width) +
           "\" points=\"";
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i) body_ += ' ';
    body_ += fmt(pts[i].first) + "," + fmt(pts[i].second);
  }
  body_ += "\"/>\n";
}

void SvgDoc::text(double x, double y, const std::string& content, int font_size,
                  const std::string& fill) {
  body_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" +
           std::to_string(font_size) + "\" font-family=\"monospace\" fill=\"" + fill + "\">" +
           xml_escape(content) + "</text>\n";
}

std::string SvgDoc::str() const {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w_) << "\" height=\""
     << fmt(h_) << "\" viewBox=\"0 0 " << fmt(w_) << " " << fmt(h_) << "\">\n";
  os << body_;
  os << "</svg>\n";
  return os.str();
}

void SvgDoc::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  STRAW_CHECK(f.good(), "cannot open svg output file: " + path);
  f << str();
  STRAW_CHECK(f.good(), "failed writing svg output file: " + path);
}

std::string SvgDoc::heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  // white (1,1,1) to red (0.85, 0.1, 0.1)
  int r = static_cast<int>(std::lround(255.0 * (1.0 - 0.15 * v)));
  int g = static_cast<int>(std::lround(255.0 * (1.0 - 0.9 * v)));
  int b = static_cast<int>(std::lround(255.0 * (1.0 - 0.9 * v)));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace straw
