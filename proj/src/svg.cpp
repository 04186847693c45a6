#include "ksyn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ksyn/errors.hpp"
#include "ksyn/io.hpp"

namespace ksyn {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

const char* series_color(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return colors[i % 6];
}

void draw_panel(std::ostringstream& svg, double ox, double oy, double w, double h,
                const std::string& title, const std::vector<SvgSeries>& series) {
    double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = -1e300;
    for (const auto& s : series) {
        for (double v : s.x) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : s.y) ymax = std::max(ymax, v);
    }
    if (!(xmax > xmin)) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    ymax = ymax <= 0.0 ? 1.0 : 1.1 * ymax;

    auto px = [&](double x) { return ox + (x - xmin) / (xmax - xmin) * w; };
    auto py = [&](double y) { return oy + h - (y - ymin) / (ymax - ymin) * h; };

    svg << "<rect x='" << fmt(ox) << "' y='" << fmt(oy) << "' width='" << fmt(w) << "' height='"
        << fmt(h) << "' fill='none' stroke='#444'/>\n";
    svg << "<text x='" << fmt(ox + w / 2) << "' y='" << fmt(oy - 8)
        << "' text-anchor='middle' font-size='13' font-family='sans-serif'>" << title << "</text>\n";
    for (int g = 0; g <= 4; ++g) {
        const double y = ymin + (ymax - ymin) * g / 4.0;
        svg << "<line x1='" << fmt(ox) << "' y1='" << fmt(py(y)) << "' x2='" << fmt(ox + w)
            << "' y2='" << fmt(py(y)) << "' stroke='#ddd'/>\n";
        svg << "<text x='" << fmt(ox - 6) << "' y='" << fmt(py(y) + 4)
            << "' text-anchor='end' font-size='10' font-family='sans-serif'>" << fmt(y)
            << "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        svg << "<polyline fill='none' stroke='" << series_color(si) << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            svg << fmt(px(s.x[i])) << "," << fmt(py(s.y[i])) << " ";
        svg << "'/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            svg << "<circle cx='" << fmt(px(s.x[i])) << "' cy='" << fmt(py(s.y[i]))
                << "' r='2.5' fill='" << series_color(si) << "'/>\n";
        svg << "<text x='" << fmt(ox + w + 8) << "' y='" << fmt(oy + 14 + 16 * static_cast<double>(si))
            << "' font-size='11' font-family='sans-serif' fill='" << series_color(si) << "'>" << s.name
            << "</text>\n";
    }
    // x tick labels at integer component counts
    for (double x = std::ceil(xmin); x <= xmax + 1e-9; x += 1.0) {
        svg << "<text x='" << fmt(px(x)) << "' y='" << fmt(oy + h + 14)
            << "' text-anchor='middle' font-size='10' font-family='sans-serif'>" << fmt(x)
            << "</text>\n";
    }
}

} // namespace

void save_metric_panels_svg(const std::filesystem::path& path, const std::string& top_title,
                            const std::vector<SvgSeries>& top, const std::string& bottom_title,
                            const std::vector<SvgSeries>& bottom) {
    std::ostringstream svg;
    const double width = 560, panel_h = 180, margin = 50;
    const double height = 2 * panel_h + 3 * margin;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    draw_panel(svg, margin, margin, width - 2 * margin - 60, panel_h, top_title, top);
    draw_panel(svg, margin, 2 * margin + panel_h, width - 2 * margin - 60, panel_h, bottom_title,
               bottom);
    svg << "</svg>\n";
    write_text_file(path, svg.str());
}

void save_confusion_svg(const std::filesystem::path& path, const std::vector<std::string>& classes,
                        const Mat& normalized) {
    if (classes.empty() || normalized.rows() != static_cast<Eigen::Index>(classes.size()))
        throw InvalidInput("confusion heatmap dimensions mismatch");
    const int n = static_cast<int>(classes.size());
    const double cell = n > 12 ? 18.0 : 28.0;
    const double label_w = 110.0, top = 40.0;
    const double width = label_w + n * cell + 30.0;
    const double height = top + n * cell + label_w;
    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << fmt(label_w + n * cell / 2.0)
        << "' y='20' text-anchor='middle' font-size='13' font-family='sans-serif'>"
        << "recognition confusion (rows = truth)</text>\n";
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double v = std::clamp(normalized(r, c), 0.0, 1.0);
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
            svg << "<rect x='" << fmt(label_w + c * cell) << "' y='" << fmt(top + r * cell)
                << "' width='" << fmt(cell) << "' height='" << fmt(cell) << "' fill='rgb(" << shade
                << "," << shade << ",255)' stroke='#eee'/>\n";
            if (v > 0.005) {
                svg << "<text x='" << fmt(label_w + c * cell + cell / 2) << "' y='"
                    << fmt(top + r * cell + cell / 2 + 3)
                    << "' text-anchor='middle' font-size='7' font-family='sans-serif'>"
                    << static_cast<int>(std::lround(v * 100)) << "</text>\n";
            }
        }
        svg << "<text x='" << fmt(label_w - 4) << "' y='" << fmt(top + r * cell + cell / 2 + 3)
            << "' text-anchor='end' font-size='8' font-family='sans-serif'>" << classes[static_cast<std::size_t>(r)]
            << "</text>\n";
    }
    for (int c = 0; c < n; ++c) {
        const double x = label_w + c * cell + cell / 2;
        const double y = top + n * cell + 6;
        svg << "<text x='" << fmt(x) << "' y='" << fmt(y)
            << "' font-size='8' font-family='sans-serif' transform='rotate(90 " << fmt(x) << " "
            << fmt(y) << ")'>" << classes[static_cast<std::size_t>(c)] << "</text>\n";
    }
    svg << "</svg>\n";
    write_text_file(path, svg.str());
}

} // namespace ksyn
