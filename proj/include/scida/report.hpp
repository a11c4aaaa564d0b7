#pragma once

#include <string>

#include "scida/trainer.hpp"

namespace scida {

// Write the self-contained run report: config copy, metrics JSON,
// training-curve CSV, correlation CSV/JSON, pseudo labels and static plot
// images. Throws LoadError when the directory cannot be written.
void emit_report(const TrainLog& log, const CorrelationMatrix& corr,
                 const std::vector<MetricsReport>& final_reports, const std::string& config_json,
                 const std::string& pseudo_json, const std::string& out_dir);

// Re-render curve.csv and the plot images from a run directory produced by
// `scida train` (reads log.json and correlation_normalized.json).
void report_from_run_dir(const std::string& run_dir);

}  // namespace scida
