#include "mcinet/figure.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mcinet::figure {

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

} // namespace

std::string comparison_svg(const train::ComparisonReport& report) {
    const double width = 480.0, height = 320.0;
    const double margin_left = 50.0, margin_bottom = 40.0, margin_top = 30.0;
    const double plot_h = height - margin_top - margin_bottom;
    const double plot_w = width - margin_left - 20.0;
    const std::size_t n = report.rows.size();
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", width) +
           "\" height=\"" + fmt("%.0f", height) + "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + fmt("%.0f", width) + "\" height=\"" +
           fmt("%.0f", height) + "\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt("%.1f", width / 2) +
           "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
           "Subject accuracy by architecture</text>\n";
    // axis
    svg += "<line x1=\"" + fmt("%.1f", margin_left) + "\" y1=\"" + fmt("%.1f", margin_top) +
           "\" x2=\"" + fmt("%.1f", margin_left) + "\" y2=\"" + fmt("%.1f", margin_top + plot_h) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt("%.1f", margin_left) + "\" y1=\"" + fmt("%.1f", margin_top + plot_h) +
           "\" x2=\"" + fmt("%.1f", margin_left + plot_w) + "\" y2=\"" +
           fmt("%.1f", margin_top + plot_h) + "\" stroke=\"black\"/>\n";
    if (n > 0) {
        const double slot = plot_w / static_cast<double>(n);
        const double bar_w = slot * 0.6;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& row = report.rows[i];
            const double h = plot_h * row.subject_accuracy;
            const double x = margin_left + slot * static_cast<double>(i) + (slot - bar_w) / 2.0;
            const double y = margin_top + plot_h - h;
            svg += "<rect x=\"" + fmt("%.2f", x) + "\" y=\"" + fmt("%.2f", y) + "\" width=\"" +
                   fmt("%.2f", bar_w) + "\" height=\"" + fmt("%.2f", h) + "\" fill=\"#4878a8\"/>\n";
            svg += "<text x=\"" + fmt("%.2f", x + bar_w / 2.0) + "\" y=\"" + fmt("%.2f", y - 4.0) +
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
                   fmt("%.2f", row.subject_accuracy * 100.0) + "%</text>\n";
            svg += "<text x=\"" + fmt("%.2f", x + bar_w / 2.0) + "\" y=\"" +
                   fmt("%.2f", margin_top + plot_h + 16.0) +
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
                   row.architecture + "</text>\n";
        }
    }
    svg += "</svg>\n";
    return svg;
}

void emit_comparison_figure(const train::ComparisonReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("emit_comparison_figure: cannot open " + path);
    os << comparison_svg(report);
}

} // namespace mcinet::figure
