#pragma once

#include <string>

#include "mcinet/train.hpp"

namespace mcinet::figure {

// Deterministic bar chart of per-architecture subject accuracy, one <rect>
// per row, labeled with the accuracy percent to two decimals.
std::string comparison_svg(const train::ComparisonReport& report);

void emit_comparison_figure(const train::ComparisonReport& report, const std::string& path);

} // namespace mcinet::figure
