#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ksyn/types.hpp"

namespace ksyn {

// Minimal deterministic SVG emission for reports.

struct SvgSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Two stacked panels (values vs component count per method): top panel one
// metric, bottom panel the other.
void save_metric_panels_svg(const std::filesystem::path& path, const std::string& top_title,
                            const std::vector<SvgSeries>& top, const std::string& bottom_title,
                            const std::vector<SvgSeries>& bottom);

// Row-normalized confusion heatmap with class labels.
void save_confusion_svg(const std::filesystem::path& path, const std::vector<std::string>& classes,
                        const Mat& normalized);

} // namespace ksyn
