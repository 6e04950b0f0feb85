#ifndef ZIBC_FOREST_PLOT_HPP
#define ZIBC_FOREST_PLOT_HPP

#include <string>
#include <vector>

#include "zibc/meta.hpp"

namespace zibc {

/// One method panel of a forest plot: study rows plus the pooled summary row
/// (the forest_rows layout).
struct ForestPanel {
    std::string title;
    std::vector<ForestRow> rows;
};

/// Deterministic SVG rendering: identical inputs give identical bytes.
std::string forest_svg(const std::vector<ForestPanel>& panels);

/// Aligned plain-text fallback of the same content.
std::string forest_text(const std::vector<ForestPanel>& panels);

} // namespace zibc

#endif
