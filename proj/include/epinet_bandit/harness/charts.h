#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "epinet_bandit/harness/compare.h"

namespace epinet_bandit::harness {

// Bar chart of % change per impression bucket with interval whiskers.
// Buckets without a usable estimate are left as labelled gaps. The y axis
// always spans zero and every finite interval end.
std::string render_chart_svg(const std::string& title, const std::vector<ComparisonRow>& rows);

// Writes <metric>.svg for every comparison metric; returns the paths.
std::vector<std::filesystem::path> emit_charts(const Comparison& comparison, const std::filesystem::path& dir);

}  // namespace epinet_bandit::harness
