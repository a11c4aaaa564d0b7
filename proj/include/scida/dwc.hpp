#pragma once

#include <string>
#include <vector>

#include "scida/losses.hpp"
#include "scida/model.hpp"

namespace scida {

// Top-n pseudo labels per target image: the n_delta = round(delta*K)
// highest-probability classes, ties broken by lower class index.
struct PseudoLabelSet {
    double delta = 0.2;
    int n_delta = 0;
    std::vector<std::string> ids;
    std::vector<LabelVector> labels;
    Mat raw_probabilities;  // N x K, the scores the labels were derived from

    std::string to_json() const;  // {"delta": real, "labels": {id: [class indices]}}
};

// Step-by-step training of the DWC branch. Each step updates exactly its
// designated parameter groups and no others.

// Weighted focal loss on both classifier heads over annotated source data;
// updates {G_cm, C1, C2}.
double step_source_supervised(ScidaModel& model, const DomainBatch& batch,
                              const FocalParams& focal, const Sgd& opt, double lr);

// Minimize wFL(source) - L_dis(target) w.r.t. {C1, C2}; G_cm frozen.
double step_max_discrepancy(ScidaModel& model, const DomainBatch& batch, const FocalParams& focal,
                            const Sgd& opt, double lr);

// Minimize L_dis(target) w.r.t. {G_cm}, repeated n_inner times; C1/C2 frozen.
// n_inner = 0 performs no update and reports the current discrepancy.
double step_min_discrepancy(ScidaModel& model, const DomainBatch& batch, const Sgd& opt, double lr,
                            int n_inner);

// Rank sigmoid(C2(G_cm(x))) per target image and keep the top n_delta
// classes. Pure function of (model, dataset, delta).
PseudoLabelSet extract_pseudo_labels(const ScidaModel& model, const Dataset& target, double delta,
                                     int batch_size = 16);

// Tie-stable top-n selection used for pseudo labels.
LabelVector top_n_labels(const Vec& probs, int n);

}  // namespace scida
