#pragma once

#include <string>

#include "scida/dataset.hpp"

namespace scida {

enum class EvalMode { all, top3 };

// Micro-averaged overall precision/recall and F-scores.
struct MetricsReport {
    EvalMode mode = EvalMode::all;
    double op = 0.0;
    double or_ = 0.0;
    double of1 = 0.0;
    double of2 = 0.0;
    double threshold = 0.5;
    bool degenerate = false;  // no predicted positives (OP undefined, reported 0)

    std::string to_json() const;  // flat object {mode, op, or, of1, of2, threshold}
};

// F-beta from precision and recall. P = R = 0 yields 0 with *degenerate set,
// not an exception.
double f_beta(double precision, double recall, double beta, bool* degenerate = nullptr);

// Micro-averaged evaluation: TP/PP/AP summed over all images and classes.
// mode=all binarizes scores at `threshold`; mode=top3 marks exactly the 3
// highest-scoring classes per image positive (ties to the lower class index).
// Throws ConfigError when the ground truth has no positive labels.
MetricsReport evaluate(const Mat& predictions, const Mat& truths, EvalMode mode,
                       double threshold = 0.5);

// Macro-averaged variants (per-class P/R averaged over classes). Exposed for
// inspection; not part of the evaluation protocol.
MetricsReport evaluate_macro(const Mat& predictions, const Mat& truths, EvalMode mode,
                             double threshold = 0.5);

}  // namespace scida
