#include "scida/dwc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "scida/errors.hpp"

namespace scida {

namespace {

Mat sigmoid_backward(const Mat& probs, const Mat& dprobs) {
    return dprobs.cwiseProduct(probs.cwiseProduct(Mat::Ones(probs.rows(), probs.cols()) - probs));
}

void check_finite(double loss, const char* step) {
    if (!std::isfinite(loss)) throw DivergenceError(std::string("non-finite loss in ") + step);
}

}  // namespace

double step_source_supervised(ScidaModel& model, const DomainBatch& batch,
                              const FocalParams& focal, const Sgd& opt, double lr) {
    if (!batch.has_source() || batch.source_labels.rows() != batch.source_images.rows())
        throw ContractError("step_source_supervised: batch lacks labeled source data");

    zero_grads(model.all_params());

    Backbone::Ctx gctx;
    const Mat feats = model.g_cm.forward(batch.source_images, &gctx);
    Mlp::Ctx c1ctx, c2ctx;
    const Mat p1 = sigmoid(model.c1.forward(feats, &c1ctx));
    const Mat p2 = sigmoid(model.c2.forward(feats, &c2ctx));

    Mat dp1, dp2;
    const double loss = weighted_focal_loss(p1, batch.source_labels, focal, &dp1) +
                        weighted_focal_loss(p2, batch.source_labels, focal, &dp2);
    check_finite(loss, "step_source_supervised");

    const Mat dfeat = model.c1.backward(c1ctx, sigmoid_backward(p1, dp1)) +
                      model.c2.backward(c2ctx, sigmoid_backward(p2, dp2));
    model.g_cm.backward(gctx, dfeat);

    for (ParamGroup g : {ParamGroup::g_cm, ParamGroup::c1, ParamGroup::c2})
        opt.step(model.group(g), lr);
    return loss;
}

double step_max_discrepancy(ScidaModel& model, const DomainBatch& batch, const FocalParams& focal,
                            const Sgd& opt, double lr) {
    if (!batch.has_source() || batch.source_labels.rows() != batch.source_images.rows())
        throw ContractError("step_max_discrepancy: batch lacks labeled source data");
    if (!batch.has_target()) throw ContractError("step_max_discrepancy: batch lacks target data");

    zero_grads(model.all_params());

    // Source supervision term. G_cm is frozen in this step, so gradients stop
    // at the classifier inputs.
    const Mat src_feats = model.g_cm.forward(batch.source_images);
    Mlp::Ctx c1s, c2s;
    const Mat p1s = sigmoid(model.c1.forward(src_feats, &c1s));
    const Mat p2s = sigmoid(model.c2.forward(src_feats, &c2s));
    Mat dp1s, dp2s;
    const double wfl = weighted_focal_loss(p1s, batch.source_labels, focal, &dp1s) +
                       weighted_focal_loss(p2s, batch.source_labels, focal, &dp2s);
    model.c1.backward(c1s, sigmoid_backward(p1s, dp1s));
    model.c2.backward(c2s, sigmoid_backward(p2s, dp2s));

    // Maximize target discrepancy: descend on -L_dis.
    const Mat tgt_feats = model.g_cm.forward(batch.target_images);
    Mlp::Ctx c1t, c2t;
    const Mat p1t = sigmoid(model.c1.forward(tgt_feats, &c1t));
    const Mat p2t = sigmoid(model.c2.forward(tgt_feats, &c2t));
    Mat dp1t, dp2t;
    const double dis = discrepancy_loss(p1t, p2t, &dp1t, &dp2t);
    model.c1.backward(c1t, sigmoid_backward(p1t, -dp1t));
    model.c2.backward(c2t, sigmoid_backward(p2t, -dp2t));

    const double objective = wfl - dis;
    check_finite(objective, "step_max_discrepancy");

    for (ParamGroup g : {ParamGroup::c1, ParamGroup::c2}) opt.step(model.group(g), lr);
    return objective;
}

double step_min_discrepancy(ScidaModel& model, const DomainBatch& batch, const Sgd& opt, double lr,
                            int n_inner) {
    if (!batch.has_target()) throw ContractError("step_min_discrepancy: batch lacks target data");
    if (n_inner < 0) throw ConfigError("step_min_discrepancy: n_inner must be >= 0");

    double dis = 0.0;
    if (n_inner == 0) {
        const Mat feats = model.g_cm.forward(batch.target_images);
        dis = discrepancy_loss(sigmoid(model.c1.forward(feats)), sigmoid(model.c2.forward(feats)));
        check_finite(dis, "step_min_discrepancy");
        return dis;
    }

    for (int it = 0; it < n_inner; ++it) {
        zero_grads(model.all_params());
        Backbone::Ctx gctx;
        const Mat feats = model.g_cm.forward(batch.target_images, &gctx);
        Mlp::Ctx c1ctx, c2ctx;
        const Mat p1 = sigmoid(model.c1.forward(feats, &c1ctx));
        const Mat p2 = sigmoid(model.c2.forward(feats, &c2ctx));
        Mat dp1, dp2;
        dis = discrepancy_loss(p1, p2, &dp1, &dp2);
        check_finite(dis, "step_min_discrepancy");
        const Mat dfeat = model.c1.backward(c1ctx, sigmoid_backward(p1, dp1)) +
                          model.c2.backward(c2ctx, sigmoid_backward(p2, dp2));
        model.g_cm.backward(gctx, dfeat);
        opt.step(model.group(ParamGroup::g_cm), lr);
    }
    return dis;
}

LabelVector top_n_labels(const Vec& probs, int n) {
    const int k = static_cast<int>(probs.size());
    std::vector<int> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return probs[a] > probs[b]; });
    std::vector<int> positives(idx.begin(), idx.begin() + std::min(n, k));
    return LabelVector::from_indices(k, positives);
}

PseudoLabelSet extract_pseudo_labels(const ScidaModel& model, const Dataset& target, double delta,
                                     int batch_size) {
    if (delta <= 0.0 || delta > 1.0) throw ConfigError("extract_pseudo_labels: delta must be in (0,1]");
    const int k = model.cfg.k;
    const int n_delta = static_cast<int>(std::lround(delta * k));
    if (n_delta == 0)
        throw ConfigError("extract_pseudo_labels: round(delta*K) is 0 (delta too small)");

    PseudoLabelSet out;
    out.delta = delta;
    out.n_delta = n_delta;
    const int n = target.size();
    out.raw_probabilities.resize(n, k);
    for (int start = 0; start < n; start += batch_size) {
        const int len = std::min(batch_size, n - start);
        Mat images(len, target.pixel_count());
        for (int i = 0; i < len; ++i) images.row(i) = target.samples[start + i].pixels.transpose();
        out.raw_probabilities.middleRows(start, len) = model.dwc_probabilities(images);
    }
    for (int i = 0; i < n; ++i) {
        out.ids.push_back(target.samples[i].id);
        out.labels.push_back(top_n_labels(out.raw_probabilities.row(i).transpose(), n_delta));
    }
    return out;
}

std::string PseudoLabelSet::to_json() const {
    nlohmann::json j;
    j["delta"] = delta;
    j["labels"] = nlohmann::json::object();
    for (std::size_t i = 0; i < ids.size(); ++i) j["labels"][ids[i]] = labels[i].positive_indices();
    return j.dump(2);
}

}  // namespace scida
