#pragma once

#include <string>
#include <vector>

#include "scida/config.hpp"
#include "scida/lwc.hpp"
#include "scida/metrics.hpp"

namespace scida {

struct EpochLog {
    int epoch = 0;
    double wfl = 0.0;       // mean supervised focal loss over batches
    double dis = 0.0;       // mean target discrepancy after the minimization step
    double selfcorr = 0.0;  // mean self-correction loss, 0 when the stage is skipped
    double churn = 1.0;     // fraction of target images whose pseudo set changed
    MetricsReport metrics;  // "all" mode on the held-out labels
    std::uint64_t corr_hash = 0;
};

struct TrainLog {
    std::vector<EpochLog> rows;

    std::string to_json() const;
    std::string curve_csv() const;  // epoch,wfl,dis,selfcorr,churn,op,or,of1,of2
    std::uint64_t hash() const;
    static TrainLog from_json_text(const std::string& text);
};

struct TrainResult {
    ScidaModel model;
    TrainLog log;
    PseudoLabelSet final_pseudo;
    CorrelationMatrix corr;
    std::vector<MetricsReport> final_reports;  // all, top3
    bool converged = false;
};

// Owns the datasets and runs the two-stage loop of the training algorithm:
// per epoch, the three DWC steps over paired batches, one self-correction
// pass over the target set (scida mode), then pseudo-label extraction, churn
// measurement and correlation rebuild. Stops when churn < eps_conv for 3
// consecutive epochs or at max_epochs.
class Trainer {
public:
    explicit Trainer(RunConfig cfg);

    // out_dir, when non-empty, receives checkpoints and the full report.
    // resume_ckpt, when non-empty, restores a previous run; the prior epoch
    // history is reloaded from the log.json next to the checkpoint so the
    // returned log matches an uninterrupted run.
    TrainResult run(const std::string& out_dir = "", const std::string& resume_ckpt = "");

    const Dataset& source() const { return source_; }
    const Dataset& target_train() const { return target_train_; }  // labels stripped
    const Dataset& target_eval() const { return target_eval_; }

private:
    RunConfig cfg_;
    Dataset source_;
    Dataset target_train_;
    Dataset target_eval_;
};

// Both "all" and "top3" reports on a labeled evaluation set, using the DWC
// branch's probabilities. Throws ConfigError on an unlabeled dataset.
std::vector<MetricsReport> evaluate_run(const ScidaModel& model, const Dataset& labeled_eval);

struct AblationRow {
    double delta = 0.0;
    bool ok = false;
    std::string error;
    MetricsReport all_report, top3_report;
};

// Run `train` once per delta with the same seed. Errors in one cell are
// recorded and the remaining cells continue.
std::vector<AblationRow> ablate_delta(const RunConfig& base, const std::vector<double>& deltas,
                                      const std::string& out_dir = "");

std::string ablation_table_json(const std::vector<AblationRow>& rows);
std::string ablation_table_csv(const std::vector<AblationRow>& rows);

}  // namespace scida
