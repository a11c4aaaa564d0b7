#include "scida/lwc.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "scida/errors.hpp"

namespace scida {

CorrelationMatrix build_correlation_matrix(const PseudoLabelSet& pseudo, int k) {
    if (pseudo.labels.empty()) throw ConfigError("build_correlation_matrix: empty pseudo-label set");
    CorrelationMatrix cm;
    cm.counts = Mat::Zero(k, k);
    for (const auto& lv : pseudo.labels) {
        const auto pos = lv.positive_indices();
        // double loop includes the diagonal: counts(i,i) is label frequency
        for (int i : pos)
            for (int j : pos) cm.counts(i, j) += 1.0;
    }
    cm.normalized = Mat::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        const double row_sum = cm.counts.row(i).sum();
        if (row_sum > 0.0) cm.normalized.row(i) = cm.counts.row(i) / row_sum;
    }
    return cm;
}

Mat lwc_forward(const ScidaModel& model, const Mat& target_images, const Mat& adjacency) {
    if (adjacency.rows() != model.label_embedding.rows())
        throw ShapeError("lwc_forward: adjacency K does not match label embedding");
    const Mat f_fc = model.fc_head.forward(model.g_t.forward(target_images));
    const Mat g = model.gcn.forward(adjacency, model.label_embedding);
    return sigmoid(fuse_forward(f_fc, g));
}

double step_self_correction(ScidaModel& model, const Mat& target_images,
                            const std::vector<std::string>& batch_ids,
                            const PseudoLabelSet& pseudo, const Sgd& opt, double lr_lwc,
                            double lr_dwc) {
    std::unordered_set<std::string> known(pseudo.ids.begin(), pseudo.ids.end());
    for (const auto& id : batch_ids)
        if (!known.count(id))
            throw ContractError("step_self_correction: no pseudo labels for target id '" + id + "'");

    zero_grads(model.all_params());

    // DWC side: sigma = sigmoid(C2(G_cm(x)))
    Backbone::Ctx gcm_ctx;
    const Mat feats_cm = model.g_cm.forward(target_images, &gcm_ctx);
    Mlp::Ctx c2_ctx;
    const Mat sigma_dwc = sigmoid(model.c2.forward(feats_cm, &c2_ctx));

    // LWC side: Y_LWC = sigmoid(fuse(FC(G_t(x)), GCN(H0, A)))
    Backbone::Ctx gt_ctx;
    const Mat feats_t = model.g_t.forward(target_images, &gt_ctx);
    Mlp::Ctx fc_ctx;
    const Mat f_fc = model.fc_head.forward(feats_t, &fc_ctx);
    Gcn::Ctx gcn_ctx;
    const Mat g = model.gcn.forward(model.adjacency, model.label_embedding, &gcn_ctx);
    const Mat y_lwc = sigmoid(fuse_forward(f_fc, g));

    // Symmetric constant-target BCE: each branch chases the other's output,
    // with the target side treated as a constant within the step. The mutual
    // fixed point y_lwc == sigma_dwc has zero gradient.
    Mat d_lwc, d_dwc;
    const double loss =
        bce_loss(y_lwc, sigma_dwc, &d_lwc) + bce_loss(sigma_dwc, y_lwc, &d_dwc);
    if (!std::isfinite(loss)) throw DivergenceError("non-finite loss in step_self_correction");

    // LWC path
    const Mat ones_l = Mat::Ones(y_lwc.rows(), y_lwc.cols());
    const Mat dlogits_l = d_lwc.cwiseProduct(y_lwc.cwiseProduct(ones_l - y_lwc));
    Mat df_fc, dg;
    fuse_backward(f_fc, g, dlogits_l, &df_fc, &dg);
    model.gcn.backward(gcn_ctx, dg);
    const Mat dfeats_t = model.fc_head.backward(fc_ctx, df_fc);
    model.g_t.backward(gt_ctx, dfeats_t);

    // DWC path
    const Mat dlogits_d = d_dwc.cwiseProduct(sigma_dwc.cwiseProduct(ones_l - sigma_dwc));
    const Mat dfeats_cm = model.c2.backward(c2_ctx, dlogits_d);
    model.g_cm.backward(gcm_ctx, dfeats_cm);

    for (ParamGroup g_ : {ParamGroup::g_t, ParamGroup::fc_head, ParamGroup::gcn})
        opt.step(model.group(g_), lr_lwc);
    // C1 carries no gradient through this loss but belongs to the optimized
    // set, so it takes the regularization part of the update.
    for (ParamGroup g_ : {ParamGroup::g_cm, ParamGroup::c1, ParamGroup::c2})
        opt.step(model.group(g_), lr_dwc);
    return loss;
}

std::string CorrelationMatrix::counts_csv() const {
    std::ostringstream os;
    for (int i = 0; i < counts.rows(); ++i) {
        for (int j = 0; j < counts.cols(); ++j) {
            if (j) os << ",";
            os << static_cast<long long>(counts(i, j));
        }
        os << "\n";
    }
    return os.str();
}

std::string CorrelationMatrix::normalized_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < normalized.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < normalized.cols(); ++j) row.push_back(normalized(i, j));
        rows.push_back(row);
    }
    return rows.dump();
}

}  // namespace scida
