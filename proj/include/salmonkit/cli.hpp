#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "salmonkit/analysis.hpp"
#include "salmonkit/metrics.hpp"

namespace salmon {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
int run(int argc, const char* const* argv);

// Atomic file write: temp file in the target directory, then rename.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

std::string metric_report_to_json(const MetricReport& report);
std::string characterization_report_to_json(const CharacterizationReport& report);

// Expands report JSONs into plot-ready CSV files (one per figure family;
// metric reports may be passed several at once, one bar-chart row per
// detector) and, optionally, simple static SVG renderings. Returns the
// files written.
std::vector<std::filesystem::path> emit_plot_data(
    const std::vector<std::filesystem::path>& report_jsons, const std::filesystem::path& out_dir,
    bool with_svg = false);

} // namespace salmon
