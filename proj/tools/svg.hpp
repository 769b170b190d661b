#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace selfres::svg {

struct series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

} // namespace detail

/// Plain line chart. Non-finite points break the line. log_y plots log10(y)
/// and drops y <= 0.
inline std::string line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                             const std::vector<series>& lines, bool log_y = false) {
  constexpr double W = 720, H = 480, L = 70, R = 190, T = 40, B = 50;
  auto ty = [&](double v) { return log_y ? (v > 0 ? std::log10(v) : NAN) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : lines) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double yv = ty(s.y[i]);
      if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, yv);
      y1 = std::max(y1, yv);
    }
  }
  if (!(x0 < x1)) x0 -= 0.5, x1 += 0.5;
  if (!(y0 < y1)) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(W) + "\" height=\"" +
                    detail::num(H) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + detail::num(W / 2 - R / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         detail::escape(title) + "</text>\n";
  out += "<rect x=\"" + detail::num(L) + "\" y=\"" + detail::num(T) + "\" width=\"" + detail::num(W - L - R) +
         "\" height=\"" + detail::num(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    out += "<text x=\"" + detail::num(px(xv)) + "\" y=\"" + detail::num(H - B + 16) + "\" text-anchor=\"middle\">" +
           detail::num(xv) + "</text>\n";
    out += "<text x=\"" + detail::num(L - 6) + "\" y=\"" + detail::num(py(yv) + 4) + "\" text-anchor=\"end\">" +
           (log_y ? "1e" + detail::num(yv) : detail::num(yv)) + "</text>\n";
  }
  out += "<text x=\"" + detail::num(L + (W - L - R) / 2) + "\" y=\"" + detail::num(H - 12) +
         "\" text-anchor=\"middle\">" + detail::escape(xlabel) + "</text>\n";
  out += "<text x=\"16\" y=\"" + detail::num(T + (H - T - B) / 2) + "\" transform=\"rotate(-90 16 " +
         detail::num(T + (H - T - B) / 2) + ")\" text-anchor=\"middle\">" + detail::escape(ylabel) + "</text>\n";

  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto& s = lines[k];
    const std::string color = colors[k % 10];
    std::string pts;
    auto flush = [&] {
      if (!pts.empty()) out += "<polyline fill=\"none\" stroke=\"" + color + "\" points=\"" + pts + "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double yv = ty(s.y[i]);
      if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) {
        flush();
        continue;
      }
      if (!pts.empty()) pts += ' ';
      pts += detail::num(px(s.x[i])) + "," + detail::num(py(yv));
    }
    flush();
    const double ly = T + 14 + 16 * static_cast<double>(k);
    out += "<line x1=\"" + detail::num(W - R + 10) + "\" y1=\"" + detail::num(ly - 4) + "\" x2=\"" +
           detail::num(W - R + 30) + "\" y2=\"" + detail::num(ly - 4) + "\" stroke=\"" + color + "\"/>\n";
    out += "<text x=\"" + detail::num(W - R + 34) + "\" y=\"" + detail::num(ly) + "\">" + detail::escape(s.name) +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

} // namespace selfres::svg
