#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace elm::eval {

// One α column of a steering plot.
struct SweepColumn {
    double alpha = 0.0;
    std::map<std::string, std::size_t> counts;  // sex: class -> count
    std::vector<double> values;                 // age: extracted years
    double sc_mean = 0.0;
};

struct SweepPlot {
    std::string concept_name;  // sex or age
    std::vector<SweepColumn> columns;
    // extraction on the original abstracts, drawn as a REF column
    std::optional<SweepColumn> reference;
};

// Stacked class counts (sex) or quartile boxes (age) against α, with the
// SC mean as a line on a second axis.
void write_sweep_svg(const std::filesystem::path& path, const SweepPlot& plot);
void write_sweep_plot_csv(const std::filesystem::path& path, const SweepPlot& plot);

}  // namespace elm::eval
