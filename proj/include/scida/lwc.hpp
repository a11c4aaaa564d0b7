#pragma once

#include "scida/dwc.hpp"

namespace scida {

// Label co-occurrence over a pseudo-label set. `counts` is symmetric with the
// per-label frequency on the diagonal; `normalized` divides each row by its
// sum (all-zero rows stay all-zero).
struct CorrelationMatrix {
    Mat counts;
    Mat normalized;

    std::string counts_csv() const;
    std::string normalized_json() const;
};

CorrelationMatrix build_correlation_matrix(const PseudoLabelSet& pseudo, int k);

// LWC branch forward: sigmoid(fuse(FC(G_t(x)), GCN(H0, adjacency))).
Mat lwc_forward(const ScidaModel& model, const Mat& target_images, const Mat& adjacency);

// Symmetric constant-target BCE between the two branches' outputs
// (stage-II self-correction). Updates {G_t, FC, GCN} at lr_lwc and
// {G_cm, C1, C2} at lr_dwc. Every id in `batch_ids` must be present in
// `pseudo`.
double step_self_correction(ScidaModel& model, const Mat& target_images,
                            const std::vector<std::string>& batch_ids,
                            const PseudoLabelSet& pseudo, const Sgd& opt, double lr_lwc,
                            double lr_dwc);

}  // namespace scida
