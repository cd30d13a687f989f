// Copyright 2026 The selfd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "selfd/experiments/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace selfd::experiments {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 80;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

struct Range {
  double lo, hi;
};

// Rounds a data range outward to a readable axis range.
Range nice_range(double lo, double hi, bool from_zero) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (from_zero) lo = std::min(0.0, lo);
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  return {from_zero && lo == 0.0 ? 0.0 : lo - pad, hi + pad};
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
}

void y_axis(std::ostringstream& os, Range r, const std::string& label) {
  const double h = kHeight - kTop - kBottom;
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = r.lo + (r.hi - r.lo) * i / 5.0;
    const double y = kHeight - kBottom - h * i / 5.0;
    os << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << y << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << y
       << "\" stroke=\"#ddd\"/>\n"
       << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  os << "<text transform=\"translate(16," << kTop + h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(label) << "</text>\n";
}

}  // namespace

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& y_label) {
  std::ostringstream os;
  header(os, title);
  double hi = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) hi = std::max(hi, v);
  }
  const Range r = nice_range(0.0, hi, true);
  y_axis(os, r, y_label);
  const double w = kWidth - kLeft - kRight, h = kHeight - kTop - kBottom;
  const double slot = labels.empty() ? w : w / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double x = kLeft + slot * (static_cast<double>(i) + 0.15);
    const double v = i < values.size() ? values[i] : std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(v)) {
      const double bh = h * (v - r.lo) / (r.hi - r.lo);
      os << "<rect x=\"" << x << "\" y=\"" << kHeight - kBottom - bh << "\" width=\"" << slot * 0.7
         << "\" height=\"" << bh << "\" fill=\"" << kPalette[i % 6] << "\"/>\n"
         << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << kHeight - kBottom - bh - 4
         << "\" text-anchor=\"middle\">" << num(v) << "</text>\n";
    } else {
      os << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << kHeight - kBottom - 4
         << "\" text-anchor=\"middle\">failed</text>\n";
    }
    os << "<text transform=\"translate(" << x + slot * 0.35 << "," << kHeight - kBottom + 14
       << ") rotate(20)\" font-size=\"11\">" << escape(labels[i]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_line_chart(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                           const std::string& y_label, bool log_x) {
  std::ostringstream os;
  header(os, title);
  auto tx = [&](double x) { return log_x ? std::log10(std::max(x, 1e-12)) : x; };
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, tx(s.x[i]));
      xhi = std::max(xhi, tx(s.x[i]));
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  const Range rx = nice_range(xlo, xhi, false), ry = nice_range(ylo, yhi, false);
  y_axis(os, ry, y_label);
  const double w = kWidth - kLeft - kRight - 120, h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + w * (tx(x) - rx.lo) / (rx.hi - rx.lo); };
  auto py = [&](double y) { return kHeight - kBottom - h * (y - ry.lo) / (ry.hi - ry.lo); };
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kLeft + w << "\" y2=\""
     << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  std::vector<double> ticks;
  for (const auto& s : series) ticks.insert(ticks.end(), s.x.begin(), s.x.end());
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  for (double t : ticks) {
    os << "<text x=\"" << px(t) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">" << num(t)
       << "</text>\n";
  }
  os << "<text x=\"" << kLeft + w / 2 << "\" y=\"" << kHeight - kBottom + 40 << "\" text-anchor=\"middle\">"
     << escape(x_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % 6];
    std::string path;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      path += (path.empty() ? "M" : " L") + coord(px(s.x[i])) + "," + coord(py(s.y[i]));
      os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    }
    if (!path.empty()) os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    const double ly = kTop + 10 + 18 * static_cast<double>(k);
    os << "<rect x=\"" << kLeft + w + 15 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color
       << "\"/>\n<text x=\"" << kLeft + w + 30 << "\" y=\"" << ly + 1 << "\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace selfd::experiments
