// Copyright 2026 The icontrol Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Minimal static SVG line/scatter plots.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace icontrol::svg {

struct Series {
    std::vector<double> x;
    std::vector<double> y;
    std::string label;
    std::string color = "#1f77b4";
    bool line = true;
    bool markers = false;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 720;
    int height = 440;
    std::vector<Series> series;
};

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return colors[i % 6];
}

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
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

// Tick positions at 1, 2 or 5 times a power of ten.
inline std::vector<double> ticks(double lo, double hi, int target = 6) {
    const double span = hi - lo;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> t;
    if (!(step > 0.0) || !std::isfinite(step)) return t;
    const double first = std::ceil(lo / step);
    for (int i = 0; i <= 4 * target; ++i) {
        const double v = (first + i) * step;
        if (v > hi + 1e-9 * span) break;
        t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return t;
}

}  // namespace detail

inline std::string render(const Plot& p) {
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, s.y[i]);
            yhi = std::max(yhi, s.y[i]);
        }
    if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    auto widen = [](double& lo, double& hi) {
        const double scale = std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
        if (hi - lo <= 1e-9 * scale) {
            const double mid = 0.5 * (lo + hi);
            lo = mid - 0.01 * scale;
            hi = mid + 0.01 * scale;
        }
    };
    widen(xlo, xhi);
    widen(ylo, yhi);
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;

    const double left = 70, right = 20, top = 40, bottom = 55;
    const double w = p.width - left - right, h = p.height - top - bottom;
    auto sx = [&](double x) { return left + (x - xlo) / (xhi - xlo) * w; };
    auto sy = [&](double y) { return top + (yhi - y) / (yhi - ylo) * h; };
    using detail::num;

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << p.width << "\" height=\"" << p.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << p.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::escape(p.title) << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : detail::ticks(xlo, xhi)) {
        o << "<line x1=\"" << num(sx(t)) << "\" y1=\"" << top + h << "\" x2=\"" << num(sx(t)) << "\" y2=\""
          << top + h + 5 << "\" stroke=\"black\"/>";
        o << "<text x=\"" << num(sx(t)) << "\" y=\"" << top + h + 18 << "\" text-anchor=\"middle\">" << num(t)
          << "</text>\n";
    }
    for (double t : detail::ticks(ylo, yhi)) {
        o << "<line x1=\"" << left - 5 << "\" y1=\"" << num(sy(t)) << "\" x2=\"" << left << "\" y2=\""
          << num(sy(t)) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << left - 8 << "\" y=\"" << num(sy(t) + 4) << "\" text-anchor=\"end\">" << num(t)
          << "</text>\n";
    }
    o << "<text x=\"" << left + w / 2 << "\" y=\"" << p.height - 12 << "\" text-anchor=\"middle\">"
      << detail::escape(p.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << top + h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::escape(p.y_label) << "</text>\n";

    for (const auto& s : p.series) {
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (s.line) {
            o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < n; ++i)
                if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) o << num(sx(s.x[i])) << "," << num(sy(s.y[i])) << " ";
            o << "\"/>\n";
        }
        if (s.markers)
            for (std::size_t i = 0; i < n; ++i)
                if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
                    o << "<circle cx=\"" << num(sx(s.x[i])) << "\" cy=\"" << num(sy(s.y[i])) << "\" r=\"2.5\" fill=\""
                      << s.color << "\"/>\n";
    }
    // Legend in the top-right corner, about 7 px per character at 12 px.
    std::size_t longest = 0;
    for (const auto& s : p.series) longest = std::max(longest, s.label.size());
    const double lx = left + w - 36 - 7.0 * static_cast<double>(longest);
    double ly = top + 14;
    for (const auto& s : p.series) {
        if (s.label.empty()) continue;
        o << "<line x1=\"" << num(lx) << "\" y1=\"" << ly - 4 << "\" x2=\"" << num(lx + 20) << "\" y2=\"" << ly - 4
          << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>";
        o << "<text x=\"" << num(lx + 26) << "\" y=\"" << ly << "\">" << detail::escape(s.label) << "</text>\n";
        ly += 16;
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace icontrol::svg
