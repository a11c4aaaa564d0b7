// Acceptance gate: one pass/fail line per criterion. Exit code is the number
// of failed criteria.
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "scida/dwc.hpp"
#include "scida/lwc.hpp"
#include "scida/metrics.hpp"
#include "scida/synth.hpp"
#include "scida/trainer.hpp"

using namespace scida;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    std::string name;
    std::function<bool(std::string&)> run;
};

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// --- 1: metric identity ------------------------------------------------------

bool metric_identity(std::string& detail) {
    const double f1 = f_beta(0.5432, 0.2230, 1.0);
    const double f2 = f_beta(0.5432, 0.2230, 2.0);
    detail = "f1=" + std::to_string(f1) + " f2=" + std::to_string(f2);
    return close(f1, 0.3162, 5e-5) && close(f2, 0.2528, 5e-5);
}

// --- 2: correlation-matrix oracle --------------------------------------------

PseudoLabelSet pseudo_from(int k, const std::vector<std::vector<int>>& sets) {
    PseudoLabelSet p;
    p.delta = 0.5;
    p.raw_probabilities = Mat::Zero(static_cast<int>(sets.size()), k);
    for (std::size_t i = 0; i < sets.size(); ++i) {
        p.ids.push_back("t" + std::to_string(i));
        p.labels.push_back(LabelVector::from_indices(k, sets[i]));
    }
    return p;
}

bool correlation_oracle(std::string& detail) {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = rng.uniform_int(2, 8);
        const int n = rng.uniform_int(1, 20);
        std::vector<std::vector<int>> sets;
        for (int i = 0; i < n; ++i) {
            std::vector<int> pos;
            for (int c = 0; c < k; ++c)
                if (rng.uniform() < 0.4) pos.push_back(c);
            if (pos.empty()) pos.push_back(rng.uniform_int(0, k - 1));
            sets.push_back(pos);
        }
        const CorrelationMatrix corr = build_correlation_matrix(pseudo_from(k, sets), k);

        Mat oracle = Mat::Zero(k, k);
        for (const auto& pos : sets)
            for (int i : pos)
                for (int j : pos) oracle(i, j) += 1.0;
        if ((corr.counts - oracle).cwiseAbs().maxCoeff() != 0.0) {
            detail = "count mismatch at trial " + std::to_string(trial);
            return false;
        }
        for (int i = 0; i < k; ++i) {
            const double row_sum = oracle.row(i).sum();
            for (int j = 0; j < k; ++j) {
                const double expect = row_sum > 0 ? oracle(i, j) / row_sum : 0.0;
                if (!close(corr.normalized(i, j), expect, 1e-9)) {
                    detail = "normalization mismatch at trial " + std::to_string(trial);
                    return false;
                }
            }
        }
    }
    detail = "50 instances exact";
    return true;
}

// --- 3: loss-formula oracles --------------------------------------------------

double wfl_oracle(const Mat& probs, const Mat& targets, double alpha, double gamma,
                  const Vec& weights) {
    double batch = 0.0;
    for (int n = 0; n < probs.rows(); ++n)
        for (int i = 0; i < probs.cols(); ++i) {
            const double p = std::min(std::max(probs(n, i), 1e-7), 1.0 - 1e-7);
            const double y = targets(n, i);
            batch -= weights[i] * (alpha * y * std::pow(1.0 - p, gamma) * std::log(p) +
                                   (1.0 - alpha) * (1.0 - y) * std::pow(p, gamma) *
                                       std::log(1.0 - p));
        }
    return batch / probs.rows();
}

double bce_oracle(const Mat& preds, const Mat& targets) {
    double batch = 0.0;
    for (int n = 0; n < preds.rows(); ++n) {
        double sample = 0.0;
        for (int i = 0; i < preds.cols(); ++i) {
            const double p = std::min(std::max(preds(n, i), 1e-7), 1.0 - 1e-7);
            sample -= targets(n, i) * std::log(p) + (1.0 - targets(n, i)) * std::log(1.0 - p);
        }
        batch += sample / preds.cols();
    }
    return batch / preds.rows();
}

bool loss_oracles(std::string& detail) {
    Rng rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = rng.uniform_int(1, 6);
        const int k = rng.uniform_int(2, 10);
        Mat probs(n, k), targets(n, k), soft(n, k);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < k; ++c) {
                probs(r, c) = rng.uniform(0.001, 0.999);
                targets(r, c) = rng.uniform() < 0.4 ? 1.0 : 0.0;
                soft(r, c) = rng.uniform();
            }
        Vec w(k);
        for (int c = 0; c < k; ++c) w[c] = rng.uniform(0.01, 1.0);
        w /= w.sum();
        FocalParams fp;
        fp.alpha = rng.uniform(0.1, 0.9);
        fp.gamma = rng.uniform(0.0, 4.0);
        fp.class_weights.proportions = w;

        worst = std::max(worst, std::abs(weighted_focal_loss(probs, targets, fp) -
                                         wfl_oracle(probs, targets, fp.alpha, fp.gamma, w)));
        worst = std::max(worst, std::abs(bce_loss(probs, soft) - bce_oracle(probs, soft)));

        // gamma = 0, alpha = 0.5, uniform weights reduces to scaled BCE
        FocalParams red;
        red.alpha = 0.5;
        red.gamma = 0.0;
        red.class_weights.proportions = Vec::Constant(k, 1.0 / k);
        const double scaled = 0.5 * (1.0 / k) * (k * bce_loss(probs, targets));
        worst = std::max(worst, std::abs(weighted_focal_loss(probs, targets, red) - scaled));
    }
    detail = "max |error| = " + std::to_string(worst);
    return worst < 1e-9;
}

// --- 4: gradient checks --------------------------------------------------------

template <typename Loss>
bool fd_check(const Mat& probs, Loss loss_and_grad, int points, Rng& rng, double& worst) {
    Mat grad;
    loss_and_grad(probs, &grad);
    const double h = 1e-6;
    for (int t = 0; t < points; ++t) {
        const int n = rng.uniform_int(0, static_cast<int>(probs.rows()) - 1);
        const int i = rng.uniform_int(0, static_cast<int>(probs.cols()) - 1);
        Mat plus = probs, minus = probs;
        plus(n, i) += h;
        minus(n, i) -= h;
        const double fd = (loss_and_grad(plus, nullptr) - loss_and_grad(minus, nullptr)) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad(n, i)), 1e-8});
        worst = std::max(worst, std::abs(fd - grad(n, i)) / denom);
        if (worst >= 1e-4) return false;
    }
    return true;
}

bool gradient_checks(std::string& detail) {
    Rng rng(31);
    Mat probs(4, 6), targets(4, 6), soft(4, 6), other(4, 6);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 6; ++c) {
            probs(r, c) = rng.uniform(0.05, 0.95);
            targets(r, c) = rng.uniform() < 0.5 ? 1.0 : 0.0;
            soft(r, c) = rng.uniform();
            other(r, c) = rng.uniform(0.05, 0.95);
        }
    FocalParams fp;
    fp.class_weights.proportions = Vec::Constant(6, 1.0 / 6);

    double worst = 0.0;
    bool ok = fd_check(probs,
                       [&](const Mat& x, Mat* g) { return weighted_focal_loss(x, targets, fp, g); },
                       100, rng, worst);
    ok = ok && fd_check(probs, [&](const Mat& x, Mat* g) { return bce_loss(x, soft, g); }, 100,
                        rng, worst);
    ok = ok && fd_check(probs,
                        [&](const Mat& x, Mat* g) {
                            Mat g1;
                            const double v = discrepancy_loss(x, other, g ? &g1 : nullptr, nullptr);
                            if (g) *g = g1;
                            return v;
                        },
                        100, rng, worst);

    // gcn_forward + fuse parameter gradients on a K=3 instance
    const int k = 3, d = 2, hidden = 5, f_dim = 4;
    Gcn gcn;
    gcn.init("g", d, hidden, f_dim, rng);
    Mat a(k, k);
    a << 0.5, 0.5, 0.0, 0.25, 0.5, 0.25, 0.0, 0.5, 0.5;
    const Mat h0 = make_label_embedding(k, d, 6);
    Mat f_fc(2, f_dim), gtargets(2, k);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < f_dim; ++c) f_fc(r, c) = rng.gaussian();
        for (int c = 0; c < k; ++c) gtargets(r, c) = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    auto objective = [&]() {
        return bce_loss(sigmoid(fuse_forward(f_fc, gcn.forward(a, h0))), gtargets);
    };
    zero_grads(gcn.params());
    Gcn::Ctx ctx;
    const Mat gout = gcn.forward(a, h0, &ctx);
    const Mat p = sigmoid(fuse_forward(f_fc, gout));
    Mat dp;
    bce_loss(p, gtargets, &dp);
    const Mat dlogits = dp.cwiseProduct(p.cwiseProduct(Mat::Ones(2, k) - p));
    Mat df_fc, dgout;
    fuse_backward(f_fc, gout, dlogits, &df_fc, &dgout);
    gcn.backward(ctx, dgout);

    const double h = 1e-6;
    int checked = 0;
    auto check_param = [&](Mat& value, const Mat& grad) {
        for (int r = 0; r < value.rows() && checked < 100; ++r)
            for (int c = 0; c < value.cols() && checked < 100; ++c) {
                const double orig = value(r, c);
                value(r, c) = orig + h;
                const double up = objective();
                value(r, c) = orig - h;
                const double dn = objective();
                value(r, c) = orig;
                const double fd = (up - dn) / (2 * h);
                const double denom = std::max({std::abs(fd), std::abs(grad(r, c)), 1e-8});
                worst = std::max(worst, std::abs(fd - grad(r, c)) / denom);
                ++checked;
            }
    };
    check_param(gcn.w0.value, gcn.w0.grad);
    check_param(gcn.w1.value, gcn.w1.grad);
    check_param(f_fc, df_fc);

    detail = "worst relative error = " + std::to_string(worst);
    return ok && worst < 1e-4;
}

// --- shared fixtures for the training-step criteria ---------------------------

ModelConfig tiny_model_config(int k, std::uint64_t seed) {
    ModelConfig mc;
    mc.k = k;
    mc.side = 16;
    mc.feature_dim = 8;
    mc.embed_dim = 4;
    mc.conv_widths = {4, 4, 4, 4};
    mc.seed = seed;
    return mc;
}

std::pair<Dataset, Dataset> tiny_pair(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.k = 4;
    cfg.side = 16;
    cfg.source_per_class = 4;
    cfg.target_count = 16;
    cfg.max_labels = 2;
    auto [src, tgt] = generate_synthetic_pair(cfg, seed);
    return {std::move(src), strip_labels(tgt)};
}

DomainBatch batch_from(const Dataset& source, const Dataset& target, int n, int offset) {
    DomainBatch batch;
    batch.source_images = Mat(n, source.pixel_count());
    batch.source_labels = Mat(n, source.num_classes());
    batch.target_images = Mat(n, target.pixel_count());
    for (int i = 0; i < n; ++i) {
        const auto& s = source.samples[(offset + i * 7) % source.size()];
        batch.source_images.row(i) = s.pixels.transpose();
        batch.source_labels.row(i) = s.label->values.transpose();
        const auto& t = target.samples[(offset + i) % target.size()];
        batch.target_images.row(i) = t.pixels.transpose();
        batch.target_ids.push_back(t.id);
    }
    return batch;
}

std::array<std::uint64_t, 6> group_hashes(ScidaModel& m) {
    const std::array<ParamGroup, 6> groups = {ParamGroup::g_cm,    ParamGroup::g_t,
                                              ParamGroup::c1,      ParamGroup::c2,
                                              ParamGroup::fc_head, ParamGroup::gcn};
    std::array<std::uint64_t, 6> h{};
    for (std::size_t i = 0; i < groups.size(); ++i) h[i] = m.group_hash(groups[i]);
    return h;
}

// --- 5: freeze contracts --------------------------------------------------------

bool freeze_contracts(std::string& detail) {
    auto [source, target] = tiny_pair(5);
    ScidaModel model = ScidaModel::create(tiny_model_config(4, 5));
    const Sgd opt;
    FocalParams focal;
    focal.class_weights = class_frequencies(source);
    const DomainBatch batch = batch_from(source, target, 4, 0);

    // changed[g] encodes which of the six groups each step may (and must) touch
    auto verify = [&](const char* step, const std::array<bool, 6>& changed,
                      const std::function<void()>& run) {
        const auto before = group_hashes(model);
        run();
        const auto after = group_hashes(model);
        for (std::size_t g = 0; g < 6; ++g)
            if ((after[g] != before[g]) != changed[g]) {
                detail = std::string(step) + ": group " + std::to_string(g) +
                         (changed[g] ? " unexpectedly frozen" : " unexpectedly changed");
                return false;
            }
        return true;
    };

    // groups: g_cm, g_t, c1, c2, fc_head, gcn
    if (!verify("source-supervised", {true, false, true, true, false, false}, [&] {
            step_source_supervised(model, batch, focal, opt, 0.01);
        }))
        return false;
    if (!verify("max-discrepancy", {false, false, true, true, false, false}, [&] {
            step_max_discrepancy(model, batch, focal, opt, 0.01);
        }))
        return false;
    if (!verify("min-discrepancy", {true, false, false, false, false, false}, [&] {
            step_min_discrepancy(model, batch, opt, 0.01, 4);
        }))
        return false;
    const auto pseudo = extract_pseudo_labels(model, target, 0.5);
    if (!verify("self-correction", {true, true, true, true, true, true}, [&] {
            step_self_correction(model, batch.target_images, batch.target_ids, pseudo, opt, 0.05,
                                 0.01);
        }))
        return false;
    if (!verify("pseudo-label extraction", {false, false, false, false, false, false}, [&] {
            extract_pseudo_labels(model, target, 0.5);
        }))
        return false;
    detail = "all five steps touch exactly their designated groups";
    return true;
}

// --- 6: adversarial direction ----------------------------------------------------

bool adversarial_direction(std::string& detail) {
    int max_up = 0, min_dn = 0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
        auto [source, target] = tiny_pair(100 + trial);
        ScidaModel model = ScidaModel::create(tiny_model_config(4, 200 + trial));
        const Sgd opt;
        FocalParams focal;
        focal.class_weights = class_frequencies(source);
        const DomainBatch batch = batch_from(source, target, 6, trial);

        auto measure = [&]() {
            const Mat f = model.g_cm.forward(batch.target_images);
            return discrepancy_loss(sigmoid(model.c1.forward(f)),
                                    sigmoid(model.c2.forward(f)));
        };
        for (int s = 0; s < 40; ++s) step_source_supervised(model, batch, focal, opt, 0.02);

        const double before_max = measure();
        step_max_discrepancy(model, batch, focal, opt, 0.02);
        max_up += measure() >= before_max;

        const double before_min = measure();
        step_min_discrepancy(model, batch, opt, 0.02, 4);
        min_dn += measure() <= before_min;
    }
    detail = "raised " + std::to_string(max_up) + "/20, lowered " + std::to_string(min_dn) + "/20";
    return max_up >= 18 && min_dn >= 18;
}

// --- 7: end-to-end improvement ----------------------------------------------------

RunConfig desk_scale_config(std::uint64_t seed) {
    SynthConfig synth;
    synth.k = 8;
    synth.side = 64;
    synth.source_per_class = 100;  // 800 source images
    synth.target_count = 400;
    synth.max_labels = 4;
    synth.jitter = 0.3;
    synth.blur_radius = 2;
    synth.downscale = 4;

    RunConfig cfg;
    cfg.synthetic = synth;
    cfg.k = 8;
    cfg.side = 64;
    cfg.feature_dim = 32;
    cfg.embed_dim = 16;
    cfg.delta = 0.25;
    cfg.max_epochs = 8;
    cfg.seed = seed;
    return cfg;
}

bool end_to_end_improvement(std::string& detail) {
    double sum_source = 0.0, sum_dwc = 0.0, sum_scida = 0.0;
    for (std::uint64_t seed : {1, 2, 3}) {
        RunConfig cfg = desk_scale_config(seed);
        cfg.mode = RunMode::source_only;
        sum_source += Trainer(cfg).run().final_reports[0].of1;
        cfg.mode = RunMode::dwc_only;
        sum_dwc += Trainer(cfg).run().final_reports[0].of1;
        cfg.mode = RunMode::scida;
        sum_scida += Trainer(cfg).run().final_reports[0].of1;
    }
    const double source = sum_source / 3, dwc = sum_dwc / 3, scida = sum_scida / 3;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "mean OF1: source_only=%.4f dwc_only=%.4f scida=%.4f", source,
                  dwc, scida);
    detail = buf;
    return scida >= source + 0.05 && dwc >= source && dwc <= scida;
}

// --- 8: delta semantics --------------------------------------------------------------

bool delta_semantics(std::string& detail) {
    // worked example: K = 20, delta = 0.2 -> exactly 4 positives per image
    SynthConfig synth;
    synth.k = 20;
    synth.side = 32;
    synth.source_per_class = 2;
    synth.target_count = 30;
    synth.max_labels = 4;

    RunConfig cfg;
    cfg.synthetic = synth;
    cfg.k = 20;
    cfg.side = 32;
    cfg.feature_dim = 16;
    cfg.embed_dim = 8;
    cfg.delta = 0.2;
    cfg.max_epochs = 2;
    cfg.seed = 4;

    Trainer trainer(cfg);
    ScidaModel model = ScidaModel::create([&] {
        ModelConfig mc;
        mc.k = 20;
        mc.side = 32;
        mc.feature_dim = 16;
        mc.embed_dim = 8;
        mc.seed = 4;
        return mc;
    }());
    const PseudoLabelSet pseudo = extract_pseudo_labels(model, trainer.target_train(), 0.2);
    if (pseudo.n_delta != 4) {
        detail = "n_delta = " + std::to_string(pseudo.n_delta) + ", expected 4";
        return false;
    }
    for (const auto& lv : pseudo.labels)
        if (lv.num_positive() != 4) {
            detail = "an image did not get exactly 4 pseudo positives";
            return false;
        }

    // the delta sweep completes and is deterministic
    const std::vector<double> deltas = {0.10, 0.15, 0.20, 0.25};
    const auto rows1 = ablate_delta(cfg, deltas);
    const auto rows2 = ablate_delta(cfg, deltas);
    for (const auto& row : rows1)
        if (!row.ok) {
            detail = "sweep cell delta=" + std::to_string(row.delta) + " failed: " + row.error;
            return false;
        }
    if (ablation_table_csv(rows1) != ablation_table_csv(rows2)) {
        detail = "sweep is not deterministic";
        return false;
    }
    detail = "4 positives at delta=0.2; 4-cell sweep deterministic";
    return true;
}

// --- 9: convergence contract ------------------------------------------------------------

bool convergence_contract(std::string& detail) {
    RunConfig cfg;
    SynthConfig synth;
    synth.k = 4;
    synth.side = 16;
    synth.source_per_class = 4;
    synth.target_count = 16;
    synth.max_labels = 2;
    cfg.synthetic = synth;
    cfg.k = 4;
    cfg.side = 16;
    cfg.feature_dim = 8;
    cfg.embed_dim = 4;
    cfg.delta = 0.5;
    cfg.max_epochs = 25;
    cfg.eps_conv = 1.0 + 1e-9;  // force the churn stop rule to fire
    cfg.seed = 6;

    Trainer trainer(cfg);
    const TrainResult res = trainer.run();
    if (!res.converged) {
        detail = "run did not stop on the churn rule";
        return false;
    }
    const PseudoLabelSet again =
        extract_pseudo_labels(res.model, trainer.target_train(), cfg.delta, cfg.batch_size);
    if (again.ids != res.final_pseudo.ids) {
        detail = "id order changed on re-extraction";
        return false;
    }
    for (std::size_t i = 0; i < again.labels.size(); ++i)
        if (again.labels[i].positive_indices() != res.final_pseudo.labels[i].positive_indices()) {
            detail = "pseudo set changed on re-extraction";
            return false;
        }
    detail = "re-extraction equals the final epoch's pseudo set (" +
             std::to_string(res.log.rows.size()) + " epochs)";
    return true;
}

// --- 10: determinism and resume ------------------------------------------------------------

bool determinism_and_resume(std::string& detail) {
    RunConfig cfg;
    SynthConfig synth;
    synth.k = 4;
    synth.side = 16;
    synth.source_per_class = 4;
    synth.target_count = 16;
    synth.max_labels = 2;
    cfg.synthetic = synth;
    cfg.k = 4;
    cfg.side = 16;
    cfg.feature_dim = 8;
    cfg.embed_dim = 4;
    cfg.delta = 0.5;
    cfg.max_epochs = 4;
    cfg.seed = 8;

    const TrainResult a = Trainer(cfg).run();
    const TrainResult b = Trainer(cfg).run();
    if (a.log.hash() != b.log.hash()) {
        detail = "identical configs gave different train logs";
        return false;
    }

    const fs::path dir = fs::temp_directory_path() / "scida_acceptance_resume";
    fs::remove_all(dir);
    const TrainResult full = Trainer(cfg).run(dir.string());
    const TrainResult resumed =
        Trainer(cfg).run("", (dir / "ckpt_epoch_2.bin").string());
    if (full.log.hash() != a.log.hash()) {
        detail = "writing a report changed the training trajectory";
        return false;
    }
    if (resumed.log.hash() != full.log.hash()) {
        detail = "resumed run diverged from the uninterrupted run";
        return false;
    }
    detail = "log hash " + std::to_string(a.log.hash()) + " reproduced and resumed";
    return true;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"metric-identity", metric_identity},
        {"correlation-oracle", correlation_oracle},
        {"loss-oracles", loss_oracles},
        {"gradient-checks", gradient_checks},
        {"freeze-contracts", freeze_contracts},
        {"adversarial-direction", adversarial_direction},
        {"end-to-end-improvement", end_to_end_improvement},
        {"delta-semantics", delta_semantics},
        {"convergence-contract", convergence_contract},
        {"determinism-and-resume", determinism_and_resume},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = criterion.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::cout << (ok ? "PASS" : "FAIL") << " " << criterion.name
                  << (detail.empty() ? "" : "  [" + detail + "]") << std::endl;
        failures += !ok;
    }
    return failures;
}
