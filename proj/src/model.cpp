#include "scida/model.hpp"

#include "scida/errors.hpp"

namespace scida {

ScidaModel ScidaModel::create(const ModelConfig& cfg) {
    ScidaModel m;
    m.cfg = cfg;
    Rng rng_gcm(sub_seed(cfg.seed, "init-g_cm"));
    Rng rng_gt(sub_seed(cfg.seed, "init-g_t"));
    Rng rng_c1(sub_seed(cfg.seed, "init-c1"));
    Rng rng_c2(sub_seed(cfg.seed, "init-c2"));
    Rng rng_fc(sub_seed(cfg.seed, "init-fc"));
    Rng rng_gcn(sub_seed(cfg.seed, "init-gcn"));

    m.g_cm.init("g_cm", cfg.side, cfg.channels, cfg.feature_dim, cfg.conv_widths, rng_gcm);
    m.g_t.init("g_t", cfg.side, cfg.channels, cfg.feature_dim, cfg.conv_widths, rng_gt);
    // C1 and C2 get independent seeds; identical init would make the
    // discrepancy maximization degenerate.
    m.c1.init("c1", cfg.feature_dim, cfg.feature_dim / 2, cfg.k, rng_c1);
    m.c2.init("c2", cfg.feature_dim, cfg.feature_dim / 2, cfg.k, rng_c2);
    m.fc_head.init("fc", cfg.feature_dim, cfg.feature_dim, cfg.feature_dim, rng_fc);
    m.gcn.init("gcn", cfg.embed_dim, 4 * cfg.embed_dim, cfg.feature_dim, rng_gcn);
    m.label_embedding = make_label_embedding(cfg.k, cfg.embed_dim, cfg.seed);
    m.adjacency = Mat::Identity(cfg.k, cfg.k);
    return m;
}

std::vector<Param*> ScidaModel::group(ParamGroup g) {
    switch (g) {
        case ParamGroup::g_cm: return g_cm.params();
        case ParamGroup::g_t: return g_t.params();
        case ParamGroup::c1: return c1.params();
        case ParamGroup::c2: return c2.params();
        case ParamGroup::fc_head: return fc_head.params();
        case ParamGroup::gcn: return gcn.params();
    }
    throw ConfigError("unknown parameter group");
}

std::vector<Param*> ScidaModel::all_params() {
    std::vector<Param*> out;
    for (ParamGroup g : {ParamGroup::g_cm, ParamGroup::g_t, ParamGroup::c1, ParamGroup::c2,
                         ParamGroup::fc_head, ParamGroup::gcn})
        for (Param* p : group(g)) out.push_back(p);
    return out;
}

std::uint64_t ScidaModel::group_hash(ParamGroup g) { return hash_params(group(g)); }

Mat ScidaModel::dwc_probabilities(const Mat& images) const {
    return sigmoid(c2.forward(g_cm.forward(images)));
}

Mat ScidaModel::lwc_probabilities(const Mat& images) const {
    const Mat f_fc = fc_head.forward(g_t.forward(images));
    const Mat g = gcn.forward(adjacency, label_embedding);
    return sigmoid(fuse_forward(f_fc, g));
}

}  // namespace scida
