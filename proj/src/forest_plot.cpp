#include "zibc/forest_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "zibc/errors.hpp"

namespace zibc {

namespace {

std::string fmt(double v, const char* spec = "%.2f") {
    char buf[48];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

struct Scale {
    double lo, hi, x0, x1;
    double operator()(double v) const {
        return x0 + (v - lo) / (hi - lo) * (x1 - x0);
    }
};

} // namespace

std::string forest_svg(const std::vector<ForestPanel>& panels) {
    if (panels.empty()) {
        throw ContractError("forest plot needs at least one panel");
    }
    double lo = 0.0, hi = 0.0;
    bool first = true;
    std::size_t total_rows = 0;
    for (const auto& panel : panels) {
        total_rows += panel.rows.size();
        for (const auto& r : panel.rows) {
            if (first) {
                lo = r.ci_low;
                hi = r.ci_high;
                first = false;
            } else {
                lo = std::min(lo, r.ci_low);
                hi = std::max(hi, r.ci_high);
            }
        }
    }
    if (first) {
        throw ContractError("forest plot needs at least one row");
    }
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    const double pad = 0.05 * (hi - lo == 0.0 ? 1.0 : hi - lo);
    lo -= pad;
    hi += pad;

    const double row_h = 22.0;
    const double panel_head = 34.0;
    const double top = 28.0;
    const double width = 860.0;
    const Scale sx{lo, hi, 220.0, 640.0};
    const double height =
        top + static_cast<double>(panels.size()) * panel_head +
        static_cast<double>(total_rows) * row_h + 40.0;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width, "%.0f")
        << "\" height=\"" << fmt(height, "%.0f") << "\" font-family=\"monospace\" "
           "font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    double y = top;
    for (const auto& panel : panels) {
        svg << "<text x=\"20\" y=\"" << fmt(y + 14.0)
            << "\" font-size=\"14\" font-weight=\"bold\">" << panel.title << "</text>\n";
        y += panel_head;
        const double panel_top = y - 6.0;
        const double panel_bottom =
            y + static_cast<double>(panel.rows.size()) * row_h - 6.0;
        // reference line at zero effect
        svg << "<line x1=\"" << fmt(sx(0.0)) << "\" y1=\"" << fmt(panel_top)
            << "\" x2=\"" << fmt(sx(0.0)) << "\" y2=\"" << fmt(panel_bottom)
            << "\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>\n";
        for (const auto& r : panel.rows) {
            const double cy = y + row_h / 2.0 - 4.0;
            svg << "<text x=\"20\" y=\"" << fmt(cy + 4.0) << "\">" << r.label
                << "</text>\n";
            svg << "<line x1=\"" << fmt(sx(r.ci_low)) << "\" y1=\"" << fmt(cy)
                << "\" x2=\"" << fmt(sx(r.ci_high)) << "\" y2=\"" << fmt(cy)
                << "\" stroke=\"black\"/>\n";
            if (r.is_summary) {
                const double cx = sx(r.effect);
                svg << "<polygon points=\"" << fmt(cx - 7.0) << "," << fmt(cy) << " "
                    << fmt(cx) << "," << fmt(cy - 6.0) << " " << fmt(cx + 7.0) << ","
                    << fmt(cy) << " " << fmt(cx) << "," << fmt(cy + 6.0)
                    << "\" fill=\"black\"/>\n";
            } else {
                const double s = 3.0 + 5.0 * std::sqrt(std::max(r.weight, 0.0));
                svg << "<rect x=\"" << fmt(sx(r.effect) - s / 2.0) << "\" y=\""
                    << fmt(cy - s / 2.0) << "\" width=\"" << fmt(s) << "\" height=\""
                    << fmt(s) << "\" fill=\"#444\"/>\n";
            }
            svg << "<text x=\"650\" y=\"" << fmt(cy + 4.0) << "\">"
                << fmt(r.effect, "%8.3f") << " [" << fmt(r.ci_low, "%7.3f") << ", "
                << fmt(r.ci_high, "%7.3f") << "]</text>\n";
            y += row_h;
        }
    }

    // shared axis labels along the bottom
    const double axis_y = height - 20.0;
    svg << "<line x1=\"" << fmt(sx(lo)) << "\" y1=\"" << fmt(axis_y) << "\" x2=\""
        << fmt(sx(hi)) << "\" y2=\"" << fmt(axis_y) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        svg << "<line x1=\"" << fmt(sx(v)) << "\" y1=\"" << fmt(axis_y) << "\" x2=\""
            << fmt(sx(v)) << "\" y2=\"" << fmt(axis_y + 4.0) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fmt(sx(v) - 14.0) << "\" y=\"" << fmt(axis_y + 16.0)
            << "\">" << fmt(v, "%.2f") << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string forest_text(const std::vector<ForestPanel>& panels) {
    std::ostringstream out;
    constexpr int bar_width = 41;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& panel : panels) {
        for (const auto& r : panel.rows) {
            if (first) {
                lo = r.ci_low;
                hi = r.ci_high;
                first = false;
            } else {
                lo = std::min(lo, r.ci_low);
                hi = std::max(hi, r.ci_high);
            }
        }
    }
    if (first) {
        throw ContractError("forest plot needs at least one row");
    }
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    const auto pos = [&](double v) {
        const int c = static_cast<int>(std::lround((v - lo) / (hi - lo) * (bar_width - 1)));
        return std::clamp(c, 0, bar_width - 1);
    };
    for (const auto& panel : panels) {
        out << "== " << panel.title << " ==\n";
        for (const auto& r : panel.rows) {
            std::string bar(bar_width, ' ');
            const int a = pos(r.ci_low), b = pos(r.ci_high);
            for (int c = a; c <= b; ++c) {
                bar[static_cast<std::size_t>(c)] = '-';
            }
            bar[static_cast<std::size_t>(pos(r.effect))] = r.is_summary ? '#' : 'o';
            const int zero = pos(0.0);
            if (bar[static_cast<std::size_t>(zero)] == ' ') {
                bar[static_cast<std::size_t>(zero)] = '|';
            }
            char line[160];
            std::snprintf(line, sizeof(line), "%-14s %8.3f [%8.3f, %8.3f]  |%s|\n",
                          r.label.c_str(), r.effect, r.ci_low, r.ci_high, bar.c_str());
            out << line;
        }
        out << "\n";
    }
    return out.str();
}

} // namespace zibc
