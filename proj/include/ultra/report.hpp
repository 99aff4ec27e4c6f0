#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ultra/eval.hpp"
#include "ultra/ppo.hpp"

namespace ultra {

struct VariantSummary {
    std::string name; // "control", "A", "R", "RA", ...
    EvalResult eval;
    std::vector<IterationLog> curve;
};

namespace detail {

inline std::string fmt(double v, int decimals = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

} // namespace detail

// report.csv: one row per variant with pooled statistics and the percent
// improvement over the control row.
inline void write_report_csv(const std::string& path,
                             const std::vector<VariantSummary>& variants,
                             const std::string& control_name = "control") {
    double baseline = 0.0;
    for (const auto& v : variants)
        if (v.name == control_name) baseline = v.eval.mean;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_report_csv: cannot open " + path);
    out << "variant,mean_return,std_return,episodes,improvement_vs_" << control_name << "\n";
    for (const auto& v : variants) {
        Comparison c = compare(v.eval.mean, baseline);
        out << v.name << "," << detail::fmt(v.eval.mean) << "," << detail::fmt(v.eval.stddev)
            << "," << v.eval.episode_returns.size() << ","
            << detail::fmt(c.improvement, 1) << (c.relative ? "%" : "") << "\n";
    }
}

inline void write_learning_curve_csv(const std::string& path,
                                     const std::vector<VariantSummary>& variants) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_learning_curve_csv: cannot open " + path);
    out << "variant,iteration,episodes,matched_states,mean_return\n";
    for (const auto& v : variants)
        for (const auto& it : v.curve)
            out << v.name << "," << it.iteration << "," << it.episodes << ","
                << it.matched_states << "," << detail::fmt(it.mean_return) << "\n";
}

// Minimal self-contained SVG line plot of mean return per iteration, one
// polyline per variant. Pure text output, deterministic for fixed input.
inline void write_learning_curve_svg(const std::string& path,
                                     const std::vector<VariantSummary>& variants) {
    const int width = 720, height = 420, margin = 50;
    double lo = 0.0, hi = 0.0;
    int max_iter = 1;
    bool any = false;
    for (const auto& v : variants)
        for (const auto& it : v.curve) {
            if (!any) { lo = hi = it.mean_return; any = true; }
            lo = std::min(lo, it.mean_return);
            hi = std::max(hi, it.mean_return);
            max_iter = std::max(max_iter, it.iteration);
        }
    if (!any) { lo = -1.0; hi = 1.0; }
    if (hi - lo < 1e-9) { hi += 0.5; lo -= 0.5; }

    auto x_of = [&](double iter) {
        return margin + (width - 2 * margin) * (max_iter == 0 ? 0.0 : iter / max_iter);
    };
    auto y_of = [&](double r) {
        return height - margin - (height - 2 * margin) * (r - lo) / (hi - lo);
    };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_learning_curve_svg: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" font-size=\"12\" text-anchor=\"middle\">iteration</text>\n";
    out << "<text x=\"14\" y=\"" << height / 2
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << height / 2 << ")\">mean return</text>\n";
    out << "<text x=\"" << margin - 6 << "\" y=\"" << height - margin + 4
        << "\" font-size=\"10\" text-anchor=\"end\">" << detail::fmt(lo, 2) << "</text>\n";
    out << "<text x=\"" << margin - 6 << "\" y=\"" << margin + 4
        << "\" font-size=\"10\" text-anchor=\"end\">" << detail::fmt(hi, 2) << "</text>\n";

    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        const auto& v = variants[vi];
        if (v.curve.empty()) continue;
        const char* color = palette[vi % 5];
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& it : v.curve)
            out << detail::fmt(x_of(it.iteration), 1) << ","
                << detail::fmt(y_of(it.mean_return), 1) << " ";
        out << "\"/>\n";
        out << "<text x=\"" << width - margin + 4 << "\" y=\""
            << margin + 14 * static_cast<int>(vi) + 10 << "\" font-size=\"11\" fill=\""
            << color << "\">" << v.name << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace ultra
