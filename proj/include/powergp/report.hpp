#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace powergp {

// Minimal deterministic SVG plotting: every figure the pipeline emits is a
// standalone vector-graphics file whose bytes depend only on the data.
struct Series {
    std::string label;
    std::string color = "#1f77b4";
    bool draw_line = true;
    bool draw_markers = false;
    std::vector<std::pair<double, double>> points;
};

void write_chart_svg(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series);

// Histogram as density bars with an overlaid normal pdf at (mu, sigma).
void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::string& x_label, std::span<const double> values,
                         int bins, double mu, double sigma);

} // namespace powergp
