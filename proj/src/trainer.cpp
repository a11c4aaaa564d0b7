#include "scida/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scida/checkpoint.hpp"
#include "scida/errors.hpp"
#include "scida/mai.hpp"
#include "scida/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scida {

namespace {

Mat gather_images(const Dataset& ds, const std::vector<int>& order, int start, int len) {
    Mat out(len, ds.pixel_count());
    for (int i = 0; i < len; ++i) out.row(i) = ds.samples[order[start + i]].pixels.transpose();
    return out;
}

Mat gather_labels(const Dataset& ds, const std::vector<int>& order, int start, int len, int k) {
    Mat out(len, k);
    for (int i = 0; i < len; ++i) out.row(i) = ds.samples[order[start + i]].label->values.transpose();
    return out;
}

double schedule_lr(double base, int epoch, int decay_epochs, double factor) {
    if (decay_epochs <= 0) return base;
    return base * std::pow(factor, (epoch - 1) / decay_epochs);
}

std::uint64_t corr_snapshot_hash(const CorrelationMatrix& corr) {
    std::uint64_t h = fnv1a(corr.counts.data(), sizeof(double) * corr.counts.size());
    return fnv1a(corr.normalized.data(), sizeof(double) * corr.normalized.size(), h);
}

double pseudo_churn(const PseudoLabelSet& now, const std::vector<std::vector<int>>& prev) {
    int changed = 0;
    for (std::size_t i = 0; i < now.labels.size(); ++i)
        if (now.labels[i].positive_indices() != prev[i]) ++changed;
    return static_cast<double>(changed) / static_cast<double>(now.labels.size());
}

}  // namespace

Trainer::Trainer(RunConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.synthetic) {
        auto [src, tgt] = generate_synthetic_pair(*cfg_.synthetic, sub_seed(cfg_.seed, "synth-data"));
        source_ = std::move(src);
        target_eval_ = std::move(tgt);
        target_train_ = strip_labels(target_eval_);
    } else {
        source_ = load_mai(cfg_.mai_source_root, MaiSplit::train, cfg_.side);
        target_train_ = strip_labels(load_mai(cfg_.mai_target_root, MaiSplit::train, cfg_.side));
        target_eval_ = load_mai(cfg_.mai_target_root, MaiSplit::eval, cfg_.side);
    }
    if (source_.num_classes() != cfg_.k)
        throw ConfigError("source dataset has " + std::to_string(source_.num_classes()) +
                          " classes, config expects " + std::to_string(cfg_.k));
}

TrainResult Trainer::run(const std::string& out_dir, const std::string& resume_ckpt) {
    ModelConfig mc;
    mc.k = cfg_.k;
    mc.side = cfg_.side;
    mc.feature_dim = cfg_.feature_dim;
    mc.embed_dim = cfg_.embed_dim;
    mc.seed = cfg_.seed;
    ScidaModel model = ScidaModel::create(mc);

    const Sgd opt{cfg_.momentum, cfg_.weight_decay};
    FocalParams focal;
    focal.alpha = cfg_.focal_alpha;
    focal.gamma = cfg_.focal_gamma;
    focal.class_weights = class_frequencies(source_);

    int start_epoch = 1;
    int churn_streak = 0;
    std::vector<std::vector<int>> prev_pseudo;
    bool have_prev = false;

    TrainLog log;

    if (!resume_ckpt.empty()) {
        const CheckpointExtra extra = load_checkpoint(resume_ckpt, model);
        if (extra.config_hash != cfg_.hash())
            throw ConfigError("checkpoint was produced by a different configuration");
        start_epoch = extra.epoch + 1;
        churn_streak = extra.churn_streak;
        if (!extra.pseudo_ids.empty()) {
            prev_pseudo = extra.pseudo_positives;
            have_prev = true;
        }
        // Carry over the epoch history so the continued run's log matches an
        // uninterrupted one.
        const fs::path prior_log = fs::path(resume_ckpt).parent_path() / "log.json";
        if (fs::exists(prior_log)) {
            std::ifstream in(prior_log);
            std::string text((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
            for (auto& row : TrainLog::from_json_text(text).rows)
                if (row.epoch <= extra.epoch) log.rows.push_back(row);
        }
    }

    if (!out_dir.empty()) fs::create_directories(out_dir);
    TrainResult result{std::move(model), {}, {}, {}, {}, false};
    ScidaModel& m = result.model;

    PseudoLabelSet pseudo;
    CorrelationMatrix corr;
    bool have_corr = false;

    const int num_batches = std::max(1, source_.size() / cfg_.batch_size);
    const int nt = target_train_.size();

    for (int epoch = start_epoch; epoch <= cfg_.max_epochs; ++epoch) {
        const double lr_dwc =
            schedule_lr(cfg_.lr_dwc, epoch, cfg_.schedule.dwc_decay_epochs, cfg_.schedule.factor);
        const double lr_lwc =
            schedule_lr(cfg_.lr_lwc, epoch, cfg_.schedule.lwc_decay_epochs, cfg_.schedule.factor);

        const auto src_order = epoch_order(source_.size(), epoch, cfg_.seed, "source-order");
        const auto tgt_order = epoch_order(nt, epoch, cfg_.seed, "target-order");

        // Stage I: adversarial pseudo-label generation (supervised step,
        // discrepancy maximization, discrepancy minimization).
        double wfl_sum = 0.0, dis_sum = 0.0;
        for (int b = 0; b < num_batches; ++b) {
            DomainBatch batch;
            const int sstart = (b * cfg_.batch_size) % source_.size();
            const int slen = std::min(cfg_.batch_size, source_.size() - sstart);
            batch.source_images = gather_images(source_, src_order, sstart, slen);
            batch.source_labels = gather_labels(source_, src_order, sstart, slen, cfg_.k);
            std::vector<int> tidx(slen);
            for (int i = 0; i < slen; ++i) tidx[i] = tgt_order[(b * cfg_.batch_size + i) % nt];
            batch.target_images = Mat(slen, target_train_.pixel_count());
            for (int i = 0; i < slen; ++i) {
                batch.target_images.row(i) = target_train_.samples[tidx[i]].pixels.transpose();
                batch.target_ids.push_back(target_train_.samples[tidx[i]].id);
            }

            wfl_sum += step_source_supervised(m, batch, focal, opt, lr_dwc);
            if (cfg_.mode != RunMode::source_only) {
                step_max_discrepancy(m, batch, focal, opt, lr_dwc);
                dis_sum += step_min_discrepancy(m, batch, opt, lr_dwc, cfg_.n_inner);
            }
        }

        // Stage II: symmetric BCE self-correction over the target set.
        double sc_sum = 0.0;
        int sc_steps = 0;
        if (cfg_.mode == RunMode::scida) {
            if (!have_corr) {
                // First pass needs an adjacency; build it from the current
                // pseudo labels (resume restores it from the checkpoint).
                if (resume_ckpt.empty() || m.adjacency.isIdentity(0.0)) {
                    const PseudoLabelSet boot =
                        extract_pseudo_labels(m, target_train_, cfg_.delta, cfg_.batch_size);
                    corr = build_correlation_matrix(boot, cfg_.k);
                    m.adjacency = corr.normalized;
                }
                have_corr = true;
            }
            PseudoLabelSet ref = extract_pseudo_labels(m, target_train_, cfg_.delta, cfg_.batch_size);
            const auto sc_order = epoch_order(nt, epoch, cfg_.seed, "selfcorr-order");
            for (int start = 0; start < nt; start += cfg_.batch_size) {
                const int len = std::min(cfg_.batch_size, nt - start);
                Mat images = gather_images(target_train_, sc_order, start, len);
                std::vector<std::string> ids;
                for (int i = 0; i < len; ++i)
                    ids.push_back(target_train_.samples[sc_order[start + i]].id);
                sc_sum += step_self_correction(m, images, ids, ref, opt, lr_lwc, lr_dwc);
                ++sc_steps;
            }
        }

        // End-of-epoch pseudo labels: the convergence signal and the
        // correlation source for the next epoch.
        pseudo = extract_pseudo_labels(m, target_train_, cfg_.delta, cfg_.batch_size);
        double churn = 1.0;
        if (have_prev) churn = pseudo_churn(pseudo, prev_pseudo);
        prev_pseudo.clear();
        for (const auto& lv : pseudo.labels) prev_pseudo.push_back(lv.positive_indices());
        have_prev = true;

        corr = build_correlation_matrix(pseudo, cfg_.k);
        if (cfg_.mode == RunMode::scida) {
            m.adjacency = corr.normalized;
            have_corr = true;
        }

        EpochLog row;
        row.epoch = epoch;
        row.wfl = wfl_sum / num_batches;
        row.dis = cfg_.mode == RunMode::source_only ? 0.0 : dis_sum / num_batches;
        row.selfcorr = sc_steps > 0 ? sc_sum / sc_steps : 0.0;
        row.churn = churn;
        row.corr_hash = corr_snapshot_hash(corr);
        {
            const auto reports = evaluate_run(m, target_eval_);
            row.metrics = reports[0];
        }
        log.rows.push_back(row);

        if (!out_dir.empty()) {
            // Keep log.json current so a resumed run can rebuild the epoch
            // history even if this run is interrupted before the report.
            std::ofstream(fs::path(out_dir) / "log.json") << log.to_json() << "\n";
            CheckpointExtra extra;
            extra.epoch = epoch;
            extra.config_hash = cfg_.hash();
            extra.rng_seed = cfg_.seed;
            extra.churn_streak = churn < cfg_.eps_conv ? churn_streak + 1 : 0;
            extra.corr_counts = corr.counts;
            extra.pseudo_ids = pseudo.ids;
            extra.pseudo_positives = prev_pseudo;
            save_checkpoint((fs::path(out_dir) / "ckpt.bin").string(), m, extra);
            // Per-epoch snapshot: lets a run be resumed from any epoch, not
            // just the last one.
            save_checkpoint(
                (fs::path(out_dir) / ("ckpt_epoch_" + std::to_string(epoch) + ".bin")).string(), m,
                extra);
        }

        churn_streak = churn < cfg_.eps_conv ? churn_streak + 1 : 0;
        if (churn_streak >= 3) {
            result.converged = true;
            break;
        }
    }

    if (pseudo.ids.empty()) {
        // Resumed past max_epochs: no new epoch ran, so rebuild the final
        // state from the restored model.
        pseudo = extract_pseudo_labels(result.model, target_train_, cfg_.delta, cfg_.batch_size);
        corr = build_correlation_matrix(pseudo, cfg_.k);
        if (churn_streak >= 3) result.converged = true;
    }

    result.log = std::move(log);
    result.final_pseudo = std::move(pseudo);
    result.corr = std::move(corr);
    result.final_reports = evaluate_run(m, target_eval_);

    if (!out_dir.empty())
        emit_report(result.log, result.corr, result.final_reports, cfg_.to_json(),
                    result.final_pseudo.to_json(), out_dir);
    return result;
}

std::vector<MetricsReport> evaluate_run(const ScidaModel& model, const Dataset& labeled_eval) {
    if (labeled_eval.size() == 0) throw ConfigError("evaluate_run: empty dataset");
    const int n = labeled_eval.size();
    const int k = model.cfg.k;
    Mat preds(n, k), truths(n, k);
    const int bs = 16;
    for (int start = 0; start < n; start += bs) {
        const int len = std::min(bs, n - start);
        Mat images(len, labeled_eval.pixel_count());
        for (int i = 0; i < len; ++i) {
            const auto& s = labeled_eval.samples[start + i];
            if (!s.label)
                throw ConfigError("evaluate_run: sample '" + s.id + "' has no evaluation label");
            images.row(i) = s.pixels.transpose();
            truths.row(start + i) = s.label->values.transpose();
        }
        preds.middleRows(start, len) = model.dwc_probabilities(images);
    }
    return {evaluate(preds, truths, EvalMode::all), evaluate(preds, truths, EvalMode::top3)};
}

std::vector<AblationRow> ablate_delta(const RunConfig& base, const std::vector<double>& deltas,
                                      const std::string& out_dir) {
    std::vector<AblationRow> rows;
    for (const double d : deltas) {
        AblationRow row;
        row.delta = d;
        try {
            RunConfig cfg = base;
            cfg.delta = d;
            Trainer trainer(cfg);
            std::string cell_dir;
            if (!out_dir.empty()) {
                std::ostringstream os;
                os << "delta_" << d;
                cell_dir = (fs::path(out_dir) / os.str()).string();
            }
            TrainResult res = trainer.run(cell_dir);
            row.all_report = res.final_reports[0];
            row.top3_report = res.final_reports[1];
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(row);
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "ablation.json") << ablation_table_json(rows) << "\n";
        std::ofstream(fs::path(out_dir) / "ablation.csv") << ablation_table_csv(rows);
    }
    return rows;
}

std::string ablation_table_json(const std::vector<AblationRow>& rows) {
    json j = json::array();
    for (const auto& r : rows) {
        json cell;
        cell["delta"] = r.delta;
        cell["ok"] = r.ok;
        if (r.ok) {
            cell["all"] = json::parse(r.all_report.to_json());
            cell["top3"] = json::parse(r.top3_report.to_json());
        } else {
            cell["error"] = r.error;
        }
        j.push_back(cell);
    }
    return j.dump(2);
}

std::string ablation_table_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "delta,ok,all_op,all_or,all_of1,all_of2,top3_op,top3_or,top3_of1,top3_of2\n";
    for (const auto& r : rows) {
        os << r.delta << "," << (r.ok ? 1 : 0);
        if (r.ok)
            os << "," << r.all_report.op << "," << r.all_report.or_ << "," << r.all_report.of1
               << "," << r.all_report.of2 << "," << r.top3_report.op << "," << r.top3_report.or_
               << "," << r.top3_report.of1 << "," << r.top3_report.of2;
        else
            os << ",,,,,,,,";
        os << "\n";
    }
    return os.str();
}

std::string TrainLog::to_json() const {
    json j = json::array();
    for (const auto& r : rows) {
        json row;
        row["epoch"] = r.epoch;
        row["wfl"] = r.wfl;
        row["dis"] = r.dis;
        row["selfcorr"] = r.selfcorr;
        row["churn"] = r.churn;
        row["metrics"] = json::parse(r.metrics.to_json());
        row["corr_hash"] = r.corr_hash;
        j.push_back(row);
    }
    return j.dump(2);
}

TrainLog TrainLog::from_json_text(const std::string& text) {
    TrainLog log;
    const json j = json::parse(text);
    for (const auto& row : j) {
        EpochLog r;
        r.epoch = row.at("epoch").get<int>();
        r.wfl = row.at("wfl").get<double>();
        r.dis = row.at("dis").get<double>();
        r.selfcorr = row.at("selfcorr").get<double>();
        r.churn = row.at("churn").get<double>();
        r.corr_hash = row.at("corr_hash").get<std::uint64_t>();
        const auto& mj = row.at("metrics");
        r.metrics.mode = mj.at("mode").get<std::string>() == "all" ? EvalMode::all : EvalMode::top3;
        r.metrics.op = mj.at("op").get<double>();
        r.metrics.or_ = mj.at("or").get<double>();
        r.metrics.of1 = mj.at("of1").get<double>();
        r.metrics.of2 = mj.at("of2").get<double>();
        r.metrics.threshold = mj.at("threshold").get<double>();
        log.rows.push_back(r);
    }
    return log;
}

std::string TrainLog::curve_csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "epoch,wfl,dis,selfcorr,churn,op,or,of1,of2\n";
    for (const auto& r : rows)
        os << r.epoch << "," << r.wfl << "," << r.dis << "," << r.selfcorr << "," << r.churn << ","
           << r.metrics.op << "," << r.metrics.or_ << "," << r.metrics.of1 << "," << r.metrics.of2
           << "\n";
    return os.str();
}

std::uint64_t TrainLog::hash() const { return fnv1a(to_json()); }

}  // namespace scida
