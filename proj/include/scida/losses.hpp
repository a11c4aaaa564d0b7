#pragma once

#include "scida/dataset.hpp"

namespace scida {

// All losses operate on per-class probabilities (rows = samples) and reduce
// over the batch by mean. Probabilities are clamped to [kProbEps, 1-kProbEps]
// before any log. Pure functions, safe for concurrent use.

inline constexpr double kProbEps = 1e-7;

struct FocalParams {
    double alpha = 0.25;
    double gamma = 2.0;
    ClassFrequency class_weights;
};

// Class-frequency-weighted focal loss. `grad`, when non-null, receives
// dL/dprobs with the same shape as `probs`.
double weighted_focal_loss(const Mat& probs, const Mat& targets, const FocalParams& params,
                           Mat* grad = nullptr);

// Mean absolute difference between two classifier outputs; the adversarial
// signal. A scaled L1 metric: symmetric, non-negative, triangle inequality.
double discrepancy_loss(const Mat& p1, const Mat& p2, Mat* grad_p1 = nullptr, Mat* grad_p2 = nullptr);

// Binary cross-entropy averaged over classes and batch. Targets may be soft
// values in [0,1] and are treated as constants.
double bce_loss(const Mat& preds, const Mat& targets, Mat* grad = nullptr);

}  // namespace scida
