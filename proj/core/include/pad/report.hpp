#pragma once

#include "pad/metrics.hpp"
#include "pad/prompts.hpp"

#include <string>

namespace pad {

/// Deterministic JSON serialization (sorted keys, shortest round-trip
/// doubles): serializing the same report twice yields identical bytes.
std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(const std::string& text);

/// Aligned text table in the seven-column order
/// C-AUROC, C-AP, C-F1, S-AUROC, S-AP, S-F1, S-AUPRO (values in percent).
/// Rows: macro headline, artifact-vs-clean binary, one row per class.
std::string render_metric_table(const MetricReport& report);

/// Side-by-side synthetic/real table over C-AP, S-AP, S-F1.
std::string render_generalization(const GeneralizationReport& reports);

std::string render_anchor_stats(const AnchorSeparationStats& stats);

} // namespace pad
