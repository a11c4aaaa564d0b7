#include "scida/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "scida/errors.hpp"

namespace scida {

namespace {

// Binarize a score matrix according to the evaluation mode.
Mat binarize(const Mat& scores, EvalMode mode, double threshold) {
    const int n = static_cast<int>(scores.rows());
    const int k = static_cast<int>(scores.cols());
    Mat out = Mat::Zero(n, k);
    if (mode == EvalMode::all) {
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < k; ++c) out(r, c) = scores(r, c) >= threshold ? 1.0 : 0.0;
        return out;
    }
    const int top = std::min(3, k);
    for (int r = 0; r < n; ++r) {
        std::vector<int> idx(k);
        std::iota(idx.begin(), idx.end(), 0);
        // stable order on score ties -> lower class index wins
        std::stable_sort(idx.begin(), idx.end(),
                         [&](int a, int b) { return scores(r, a) > scores(r, b); });
        for (int i = 0; i < top; ++i) out(r, idx[i]) = 1.0;
    }
    return out;
}

}  // namespace

double f_beta(double precision, double recall, double beta, bool* degenerate) {
    if (degenerate) *degenerate = false;
    const double b2 = beta * beta;
    const double denom = b2 * precision + recall;
    if (denom == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return (1.0 + b2) * precision * recall / denom;
}

MetricsReport evaluate(const Mat& predictions, const Mat& truths, EvalMode mode, double threshold) {
    if (predictions.rows() != truths.rows() || predictions.cols() != truths.cols())
        throw ShapeError("evaluate: predictions/truths shape mismatch");
    if (predictions.rows() == 0) throw ConfigError("evaluate: empty evaluation set");
    if (truths.sum() <= 0.0) throw ConfigError("evaluate: no positive ground-truth labels");

    const Mat bin = binarize(predictions, mode, threshold);
    double tp = 0.0, pp = 0.0, ap = 0.0;
    for (int r = 0; r < bin.rows(); ++r) {
        for (int c = 0; c < bin.cols(); ++c) {
            const bool pred = bin(r, c) > 0.5;
            const bool truth = truths(r, c) > 0.5;
            tp += (pred && truth) ? 1.0 : 0.0;
            pp += pred ? 1.0 : 0.0;
            ap += truth ? 1.0 : 0.0;
        }
    }
    MetricsReport rep;
    rep.mode = mode;
    rep.threshold = threshold;
    rep.degenerate = pp == 0.0;
    rep.op = pp > 0.0 ? tp / pp : 0.0;
    rep.or_ = tp / ap;
    bool deg = false;
    rep.of1 = f_beta(rep.op, rep.or_, 1.0, &deg);
    rep.degenerate = rep.degenerate || deg;
    rep.of2 = f_beta(rep.op, rep.or_, 2.0, &deg);
    rep.degenerate = rep.degenerate || deg;
    return rep;
}

MetricsReport evaluate_macro(const Mat& predictions, const Mat& truths, EvalMode mode,
                             double threshold) {
    if (predictions.rows() != truths.rows() || predictions.cols() != truths.cols())
        throw ShapeError("evaluate_macro: predictions/truths shape mismatch");
    if (predictions.rows() == 0) throw ConfigError("evaluate_macro: empty evaluation set");
    const Mat bin = binarize(predictions, mode, threshold);
    const int k = static_cast<int>(bin.cols());
    double psum = 0.0, rsum = 0.0;
    for (int c = 0; c < k; ++c) {
        double tp = 0.0, pp = 0.0, ap = 0.0;
        for (int r = 0; r < bin.rows(); ++r) {
            const bool pred = bin(r, c) > 0.5;
            const bool truth = truths(r, c) > 0.5;
            tp += (pred && truth) ? 1.0 : 0.0;
            pp += pred ? 1.0 : 0.0;
            ap += truth ? 1.0 : 0.0;
        }
        psum += pp > 0.0 ? tp / pp : 0.0;
        rsum += ap > 0.0 ? tp / ap : 0.0;
    }
    MetricsReport rep;
    rep.mode = mode;
    rep.threshold = threshold;
    rep.op = psum / k;
    rep.or_ = rsum / k;
    rep.of1 = f_beta(rep.op, rep.or_, 1.0);
    rep.of2 = f_beta(rep.op, rep.or_, 2.0);
    return rep;
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["mode"] = mode == EvalMode::all ? "all" : "top3";
    j["op"] = op;
    j["or"] = or_;
    j["of1"] = of1;
    j["of2"] = of2;
    j["threshold"] = threshold;
    return j.dump();
}

}  // namespace scida
