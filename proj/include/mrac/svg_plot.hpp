#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mrac/errors.hpp"

namespace mrac {

/// One polyline in a plot.
struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

namespace svg_detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// 1-2-5 tick ladder.
inline double nice_step(double span, int target_ticks) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    double step = 10.0;
    if (r <= 1.0) step = 1.0;
    else if (r <= 2.0) step = 2.0;
    else if (r <= 5.0) step = 5.0;
    return step * mag;
}

inline const char* color(size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    return palette[i % 5];
}

}  // namespace svg_detail

/// Minimal static line plot. Enough for the five run panels; not a charting
/// library.
inline std::string render_svg_plot(const std::string& title, const std::string& xlabel,
                                   const std::string& ylabel,
                                   const std::vector<PlotSeries>& series) {
    using svg_detail::fmt;
    const double width = 760, height = 440;
    const double ml = 72, mr = 18, mt = 40, mb = 52;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
        for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
    }
    if (!std::isfinite(xmin) || xmin == xmax) { xmin -= 0.5; xmax = xmin + 1.0; }
    if (!std::isfinite(ymin)) { ymin = 0.0; ymax = 1.0; }
    if (ymin == ymax) { ymin -= 0.5; ymax += 0.5; }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' viewBox='0 0 " << width << " " << height << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << width / 2 << "' y='22' text-anchor='middle' font-family='sans-serif' "
           "font-size='15'>"
        << title << "</text>\n";

    const double xstep = svg_detail::nice_step(xmax - xmin, 8);
    const double ystep = svg_detail::nice_step(ymax - ymin, 6);
    svg << "<g font-family='sans-serif' font-size='11' fill='#444'>\n";
    for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax + 1e-12; x += xstep) {
        svg << "<line x1='" << fmt(px(x)) << "' y1='" << mt << "' x2='" << fmt(px(x)) << "' y2='"
            << mt + ph << "' stroke='#e0e0e0'/>\n";
        svg << "<text x='" << fmt(px(x)) << "' y='" << mt + ph + 16
            << "' text-anchor='middle'>" << fmt(x) << "</text>\n";
    }
    for (double y = std::ceil(ymin / ystep) * ystep; y <= ymax + 1e-12; y += ystep) {
        svg << "<line x1='" << ml << "' y1='" << fmt(py(y)) << "' x2='" << ml + pw << "' y2='"
            << fmt(py(y)) << "' stroke='#e0e0e0'/>\n";
        svg << "<text x='" << ml - 6 << "' y='" << fmt(py(y) + 4)
            << "' text-anchor='end'>" << fmt(y) << "</text>\n";
    }
    svg << "</g>\n";
    svg << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
        << "' fill='none' stroke='#333'/>\n";
    svg << "<text x='" << ml + pw / 2 << "' y='" << height - 14
        << "' text-anchor='middle' font-family='sans-serif' font-size='12'>" << xlabel
        << "</text>\n";
    svg << "<text x='18' y='" << mt + ph / 2
        << "' text-anchor='middle' font-family='sans-serif' font-size='12' transform='rotate(-90 "
           "18 "
        << mt + ph / 2 << ")'>" << ylabel << "</text>\n";

    for (size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        svg << "<polyline fill='none' stroke='" << svg_detail::color(i)
            << "' stroke-width='1.5' points='";
        for (size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
            if (!std::isfinite(s.y[k])) continue;
            svg << fmt(px(s.x[k])) << "," << fmt(py(std::clamp(s.y[k], ymin, ymax))) << " ";
        }
        svg << "'/>\n";
    }

    const double lx = ml + pw - 150, ly = mt + 10;
    svg << "<g font-family='sans-serif' font-size='12'>\n";
    for (size_t i = 0; i < series.size(); ++i) {
        const double yy = ly + 18.0 * static_cast<double>(i);
        svg << "<line x1='" << lx << "' y1='" << yy << "' x2='" << lx + 24 << "' y2='" << yy
            << "' stroke='" << svg_detail::color(i) << "' stroke-width='2'/>\n";
        svg << "<text x='" << lx + 30 << "' y='" << yy + 4 << "'>" << series[i].label
            << "</text>\n";
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::string& xlabel, const std::string& ylabel,
                           const std::vector<PlotSeries>& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << render_svg_plot(title, xlabel, ylabel, series);
}

}  // namespace mrac
