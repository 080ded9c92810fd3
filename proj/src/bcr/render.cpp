#include "bcr/render.hpp"

#include <sstream>

namespace bcr {

namespace {

const char* kCategoryColors[] = {"#e6194b", "#3cb44b", "#4363d8",
                                 "#f58231", "#911eb4", "#46f0f0"};

std::string base64(const std::string& bytes) {
  static const char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 2 < bytes.size()) {
    const uint32_t v = (static_cast<uint8_t>(bytes[i]) << 16) |
                       (static_cast<uint8_t>(bytes[i + 1]) << 8) |
                       static_cast<uint8_t>(bytes[i + 2]);
    out.push_back(tbl[(v >> 18) & 63]);
    out.push_back(tbl[(v >> 12) & 63]);
    out.push_back(tbl[(v >> 6) & 63]);
    out.push_back(tbl[v & 63]);
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    const uint32_t v = static_cast<uint8_t>(bytes[i]) << 16;
    out.push_back(tbl[(v >> 18) & 63]);
    out.push_back(tbl[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const uint32_t v =
        (static_cast<uint8_t>(bytes[i]) << 16) | (static_cast<uint8_t>(bytes[i + 1]) << 8);
    out.push_back(tbl[(v >> 18) & 63]);
    out.push_back(tbl[(v >> 12) & 63]);
    out.push_back(tbl[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

void emit_curve_path(std::ostringstream& os, const BezierCurve& c, int h, int w,
                     const std::string& style) {
  os << "  <path d=\"";
  const auto pts = sample_uniform(c, 64);
  for (size_t i = 0; i < pts.size(); ++i)
    os << (i ? " L " : "M ") << pts[i].x * w << " " << pts[i].y * h;
  os << "\" fill=\"none\" " << style << "/>\n";
}

void emit_polyline_path(std::ostringstream& os, const Polyline& p, int h, int w,
                        const std::string& style) {
  os << "  <path d=\"";
  for (size_t i = 0; i < p.points.size(); ++i)
    os << (i ? " L " : "M ") << p.points[i].x * w << " " << p.points[i].y * h;
  os << "\" fill=\"none\" " << style << "/>\n";
}

}  // namespace

std::string render_svg(const RenderInput& in) {
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << in.width << "\" height=\""
     << in.height << "\" viewBox=\"0 0 " << in.width << " " << in.height << "\">\n";
  if (!in.background_png.empty()) {
    os << "  <image width=\"" << in.width << "\" height=\"" << in.height
       << "\" href=\"data:image/png;base64," << base64(in.background_png) << "\"/>\n";
  } else {
    os << "  <rect width=\"" << in.width << "\" height=\"" << in.height
       << "\" fill=\"#202020\"/>\n";
  }

  const size_t m = in.categories.size();
  auto color = [&](size_t mi) { return kCategoryColors[mi % 6]; };

  // dilated tolerance bands around the final curves
  if (in.dilation_px > 0) {
    for (size_t mi = 0; mi < m && mi < in.final.size(); ++mi) {
      std::ostringstream style;
      style << "stroke=\"" << color(mi) << "\" stroke-opacity=\"0.18\" stroke-width=\""
            << 2 * in.dilation_px << "\" stroke-linecap=\"round\" stroke-linejoin=\"round\"";
      for (const BezierCurve& c : in.final[mi])
        emit_curve_path(os, c, in.height, in.width, style.str());
    }
  }

  // ground truth: thin white underlay
  if (in.gt) {
    for (size_t mi = 0; mi < in.gt->polylines.size(); ++mi)
      for (const Polyline& p : in.gt->polylines[mi])
        emit_polyline_path(os, p, in.height, in.width,
                           "stroke=\"#ffffff\" stroke-width=\"1.6\" stroke-opacity=\"0.9\"");
  }

  // initial proposals: dashed; final curves: solid
  for (size_t mi = 0; mi < m && mi < in.initial.size(); ++mi) {
    std::ostringstream style;
    style << "stroke=\"" << color(mi) << "\" stroke-width=\"0.8\" stroke-dasharray=\"3,2\" "
          << "stroke-opacity=\"0.8\"";
    for (const BezierCurve& c : in.initial[mi])
      emit_curve_path(os, c, in.height, in.width, style.str());
  }
  for (size_t mi = 0; mi < m && mi < in.final.size(); ++mi) {
    std::ostringstream style;
    style << "stroke=\"" << color(mi) << "\" stroke-width=\"1.4\"";
    for (const BezierCurve& c : in.final[mi])
      emit_curve_path(os, c, in.height, in.width, style.str());
  }

  // legend
  double ly = 12;
  for (size_t mi = 0; mi < m; ++mi) {
    os << "  <text x=\"4\" y=\"" << ly << "\" font-size=\"8\" fill=\"" << color(mi) << "\">"
       << in.categories[mi] << "</text>\n";
    ly += 10;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace bcr
