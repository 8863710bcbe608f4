#pragma once

#include <string>
#include <vector>

#include "blfmrac/feasibility.hpp"
#include "blfmrac/simulation.hpp"

namespace blfmrac {

std::vector<std::string> trajectory_columns(std::size_t n, std::size_t m);

/// One header line, then one row per sample, every value at 17 significant digits.
std::string trajectory_csv(const Trajectory& traj);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Throws InvalidInput for an unknown column.
    std::vector<double> column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

struct PlotSeries {
    std::string label;
    std::vector<double> y;
    std::string color = "#1f77b4";
};

struct PlotLine {
    std::string label;
    double value = 0.0;
    std::string color = "#d62728";
};

struct LinePlot {
    std::string title;
    std::string x_label = "t [s]";
    std::string y_label;
    std::vector<double> x;
    std::vector<PlotSeries> series;
    std::vector<PlotLine> bounds;  // dashed horizontal lines
};

/// Self-contained SVG document.
std::string render_line_plot(const LinePlot& plot);
std::string render_heatmap(const FeasibilityMap& map, const std::string& title);

}  // namespace blfmrac
