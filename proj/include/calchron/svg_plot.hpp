#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "calchron/error.hpp"
#include "calchron/summary.hpp"

namespace calchron {

namespace detail {

inline std::string svg_num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

// Tick spacing of the form {1,2,5} * 10^k giving roughly `target` ticks.
inline double nice_tick(double range, int target) {
    const double raw = range / std::max(1, target);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    double f = 10.0;
    if (norm <= 1.0)
        f = 1.0;
    else if (norm <= 2.0)
        f = 2.0;
    else if (norm <= 5.0)
        f = 5.0;
    return f * mag;
}

}  // namespace detail

/// Overlaid density outlines (one polyline per series) with axes and a
/// legend, written as a standalone SVG document.
inline std::string density_overlay_svg(const std::vector<DensityGrid>& series,
                                       const std::vector<std::string>& labels,
                                       int width = 900, int height = 360) {
    if (series.empty()) throw Error(errc::bad_argument, "no densities to plot");
    if (!labels.empty() && labels.size() != series.size())
        throw Error(errc::bad_argument, "label count does not match series count");

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    constexpr int n_colors = 8;

    double x_lo = series.front().lo, x_hi = series.front().hi(), y_hi = 0.0;
    for (const DensityGrid& g : series) {
        x_lo = std::min(x_lo, g.lo);
        x_hi = std::max(x_hi, g.hi());
        for (double d : g.density) y_hi = std::max(y_hi, d);
    }
    if (!(x_hi > x_lo) || !(y_hi > 0.0))
        throw Error(errc::bad_argument, "degenerate plot ranges");
    y_hi *= 1.06;

    const double ml = 70, mr = 20, mt = 18, mb = 48;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto sx = [&](double t) { return ml + (t - x_lo) / (x_hi - x_lo) * pw; };
    auto sy = [&](double d) { return mt + ph - d / y_hi * ph; };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // Axes.
    s += "<g stroke=\"#333\" stroke-width=\"1\" fill=\"none\">\n";
    s += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" + detail::svg_num(mt + ph) + "\" x2=\"" +
         detail::svg_num(ml + pw) + "\" y2=\"" + detail::svg_num(mt + ph) + "\"/>\n";
    s += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" + detail::svg_num(mt) + "\" x2=\"" +
         detail::svg_num(ml) + "\" y2=\"" + detail::svg_num(mt + ph) + "\"/>\n";
    s += "</g>\n";

    const double xt = detail::nice_tick(x_hi - x_lo, 7);
    s += "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">\n";
    for (double t = std::ceil(x_lo / xt) * xt; t <= x_hi + 1e-9; t += xt) {
        s += "<line stroke=\"#333\" x1=\"" + detail::svg_num(sx(t)) + "\" y1=\"" +
             detail::svg_num(mt + ph) + "\" x2=\"" + detail::svg_num(sx(t)) + "\" y2=\"" +
             detail::svg_num(mt + ph + 5) + "\"/>\n";
        char lab[48];
        std::snprintf(lab, sizeof(lab), "%g", t);
        s += "<text text-anchor=\"middle\" x=\"" + detail::svg_num(sx(t)) + "\" y=\"" +
             detail::svg_num(mt + ph + 19) + "\">" + lab + "</text>\n";
    }
    const double yt = detail::nice_tick(y_hi, 4);
    for (double d = 0.0; d <= y_hi + 1e-12; d += yt) {
        s += "<line stroke=\"#333\" x1=\"" + detail::svg_num(ml - 5) + "\" y1=\"" +
             detail::svg_num(sy(d)) + "\" x2=\"" + detail::svg_num(ml) + "\" y2=\"" +
             detail::svg_num(sy(d)) + "\"/>\n";
        char lab[48];
        std::snprintf(lab, sizeof(lab), "%g", d);
        s += "<text text-anchor=\"end\" x=\"" + detail::svg_num(ml - 8) + "\" y=\"" +
             detail::svg_num(sy(d) + 4) + "\">" + lab + "</text>\n";
    }
    s += "<text text-anchor=\"middle\" x=\"" + detail::svg_num(ml + pw / 2) + "\" y=\"" +
         detail::svg_num(height - 10.0) + "\">calendar age (cal BP)</text>\n";
    s += "<text text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         detail::svg_num(mt + ph / 2) + ")\" x=\"16\" y=\"" + detail::svg_num(mt + ph / 2) +
         "\">density</text>\n";
    s += "</g>\n";

    // Density outlines.
    for (std::size_t k = 0; k < series.size(); ++k) {
        const DensityGrid& g = series[k];
        s += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"";
        s += palette[k % n_colors];
        s += "\" points=\"";
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (i) s += ' ';
            s += detail::svg_num(sx(g.theta(i))) + "," + detail::svg_num(sy(g.density[i]));
        }
        s += "\"/>\n";
    }

    // Legend.
    if (!labels.empty()) {
        double ly = mt + 14;
        s += "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">\n";
        for (std::size_t k = 0; k < labels.size(); ++k) {
            const double lx = ml + pw - 150;
            s += "<line stroke-width=\"2\" stroke=\"" + std::string(palette[k % n_colors]) +
                 "\" x1=\"" + detail::svg_num(lx) + "\" y1=\"" + detail::svg_num(ly - 4) +
                 "\" x2=\"" + detail::svg_num(lx + 24) + "\" y2=\"" + detail::svg_num(ly - 4) +
                 "\"/>\n";
            s += "<text x=\"" + detail::svg_num(lx + 30) + "\" y=\"" + detail::svg_num(ly) + "\">" +
                 labels[k] + "</text>\n";
            ly += 17;
        }
        s += "</g>\n";
    }

    s += "</svg>\n";
    return s;
}

}  // namespace calchron
