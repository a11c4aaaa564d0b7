#include "scida/losses.hpp"

#include <cmath>

#include "scida/errors.hpp"

namespace scida {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
}

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

}  // namespace

double weighted_focal_loss(const Mat& probs, const Mat& targets, const FocalParams& params,
                           Mat* grad) {
    check_same_shape(probs, targets, "weighted_focal_loss");
    const auto& w = params.class_weights.proportions;
    if (w.size() != probs.cols())
        throw ShapeError("weighted_focal_loss: class_weights length " + std::to_string(w.size()) +
                         " vs K=" + std::to_string(probs.cols()));
    const double a = params.alpha;
    const double g = params.gamma;
    const int n = static_cast<int>(probs.rows());
    const int k = static_cast<int>(probs.cols());
    if (grad) grad->setZero(n, k);

    double total = 0.0;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < k; ++c) {
            const double p = clamp_prob(probs(r, c));
            const double y = targets(r, c);
            const double pos = a * y * std::pow(1.0 - p, g) * std::log(p);
            const double neg = (1.0 - a) * (1.0 - y) * std::pow(p, g) * std::log(1.0 - p);
            total -= w[c] * (pos + neg);
            if (grad) {
                const double dpos =
                    a * y * (std::pow(1.0 - p, g) / p -
                             (g > 0.0 ? g * std::pow(1.0 - p, g - 1.0) * std::log(p) : 0.0));
                const double dneg =
                    (1.0 - a) * (1.0 - y) *
                    ((g > 0.0 ? g * std::pow(p, g - 1.0) * std::log(1.0 - p) : 0.0) -
                     std::pow(p, g) / (1.0 - p));
                (*grad)(r, c) = -w[c] * (dpos + dneg) / n;
            }
        }
    }
    return total / n;
}

double discrepancy_loss(const Mat& p1, const Mat& p2, Mat* grad_p1, Mat* grad_p2) {
    check_same_shape(p1, p2, "discrepancy_loss");
    const double scale = 1.0 / (p1.rows() * p1.cols());
    if (grad_p1) grad_p1->setZero(p1.rows(), p1.cols());
    if (grad_p2) grad_p2->setZero(p1.rows(), p1.cols());
    double total = 0.0;
    for (int r = 0; r < p1.rows(); ++r) {
        for (int c = 0; c < p1.cols(); ++c) {
            const double d = p1(r, c) - p2(r, c);
            total += std::abs(d);
            const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            if (grad_p1) (*grad_p1)(r, c) = s * scale;
            if (grad_p2) (*grad_p2)(r, c) = -s * scale;
        }
    }
    return total * scale;
}

double bce_loss(const Mat& preds, const Mat& targets, Mat* grad) {
    check_same_shape(preds, targets, "bce_loss");
    const int n = static_cast<int>(preds.rows());
    const int k = static_cast<int>(preds.cols());
    if (grad) grad->setZero(n, k);
    double total = 0.0;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < k; ++c) {
            const double p = clamp_prob(preds(r, c));
            const double y = targets(r, c);
            total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
            if (grad) (*grad)(r, c) = -(y / p - (1.0 - y) / (1.0 - p)) / (n * k);
        }
    }
    return total / (n * k);
}

}  // namespace scida
