#pragma once

#include <cstdint>
#include <vector>

#include "scida/nn.hpp"

namespace scida {

// Parameter groups with distinct roles in the training steps. Freeze
// contracts are expressed (and tested) in terms of these groups.
enum class ParamGroup { g_cm, g_t, c1, c2, fc_head, gcn };

struct ModelConfig {
    int k = 8;
    int side = 64;
    int channels = 3;
    int feature_dim = 128;
    int embed_dim = 64;
    std::vector<int> conv_widths = {8, 16, 16, 16};
    std::uint64_t seed = 0;
};

// All parametric components: shared generator G_cm, target generator G_t,
// classifiers C1/C2, the FC head and the label GCN, plus the fixed label
// embedding and the current adjacency.
struct ScidaModel {
    ModelConfig cfg;
    Backbone g_cm, g_t;
    Mlp c1, c2, fc_head;
    Gcn gcn;
    Mat label_embedding;  // K x d, deterministic from seed
    Mat adjacency;        // row-normalized correlation matrix, identity until built

    static ScidaModel create(const ModelConfig& cfg);

    std::vector<Param*> group(ParamGroup g);
    std::vector<Param*> all_params();
    std::uint64_t group_hash(ParamGroup g);

    // sigmoid(C2(G_cm(x))): the DWC branch's probability output.
    Mat dwc_probabilities(const Mat& images) const;
    // sigmoid(fuse(FC(G_t(x)), GCN(H0, A))): the LWC branch's output.
    Mat lwc_probabilities(const Mat& images) const;
};

}  // namespace scida
