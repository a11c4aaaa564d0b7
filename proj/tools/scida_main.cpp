#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "scida/checkpoint.hpp"
#include "scida/config.hpp"
#include "scida/errors.hpp"
#include "scida/mai.hpp"
#include "scida/report.hpp"
#include "scida/trainer.hpp"

namespace fs = std::filesystem;
using namespace scida;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int cmd_gen_synth(const std::string& config_path, const std::string& out_dir, std::uint64_t seed) {
    const SynthConfig cfg = synth_config_from_file(config_path);
    auto [source, target] = generate_synthetic_pair(cfg, seed);
    save_mai(source, (fs::path(out_dir) / "source").string(), LabelPolicy::with_labels);
    save_mai(target, (fs::path(out_dir) / "target").string(), LabelPolicy::hidden_labels);
    std::ofstream(fs::path(out_dir) / "synth_config.json") << synth_config_to_json(cfg) << "\n";
    std::cout << "wrote " << source.size() << " source and " << target.size()
              << " target images under " << out_dir << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, const std::string& mode,
              const std::string& resume) {
    RunConfig cfg = RunConfig::from_file(config_path);
    if (!mode.empty()) cfg.mode = run_mode_from_string(mode);
    Trainer trainer(cfg);
    const TrainResult res = trainer.run(out_dir, resume);
    std::cout << "trained " << res.log.rows.size() << " epochs ("
              << (res.converged ? "converged" : "max epochs") << ")\n";
    for (const auto& rep : res.final_reports) std::cout << rep.to_json() << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_root) {
    // The sidecar carries the seed; the model geometry comes from the
    // config stored next to the checkpoint.
    const fs::path cfg_path = fs::path(ckpt_path).parent_path() / "config.json";
    std::ifstream cfg_in(cfg_path);
    if (!cfg_in) throw ConfigError("no config.json next to checkpoint: " + cfg_path.string());
    std::stringstream buf;
    buf << cfg_in.rdbuf();
    const RunConfig cfg = RunConfig::from_json_text(buf.str());

    ModelConfig mc;
    mc.k = cfg.k;
    mc.side = cfg.side;
    mc.feature_dim = cfg.feature_dim;
    mc.embed_dim = cfg.embed_dim;
    mc.seed = cfg.seed;
    ScidaModel model = ScidaModel::create(mc);
    load_checkpoint(ckpt_path, model);

    const Dataset eval_set = load_mai(data_root, MaiSplit::eval, cfg.side);
    for (const auto& rep : evaluate_run(model, eval_set)) std::cout << rep.to_json() << "\n";
    return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& deltas_csv,
               const std::string& out_dir) {
    const RunConfig cfg = RunConfig::from_file(config_path);
    std::vector<double> deltas;
    std::stringstream ss(deltas_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) deltas.push_back(std::stod(tok));
    }
    if (deltas.empty()) throw ConfigError("--deltas list is empty");
    const auto rows = ablate_delta(cfg, deltas, out_dir);
    std::cout << ablation_table_csv(rows);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SCIDA: single- to multi-label domain adaptation trainer"};
    app.require_subcommand(1);

    std::string config_path, out_dir, mode, resume, ckpt_path, data_root, deltas_csv, run_dir;
    std::uint64_t seed = 0;

    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic dataset pair");
    gen->add_option("--config", config_path, "synthetic config JSON")->required();
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--seed", seed, "generation seed");

    auto* train = app.add_subcommand("train", "run the two-stage training loop");
    train->add_option("--config", config_path, "run config JSON")->required();
    train->add_option("--out", out_dir, "run directory")->required();
    train->add_option("--mode", mode, "scida|source_only|dwc_only (overrides config)");
    train->add_option("--resume", resume, "checkpoint to resume from");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a labeled dataset");
    eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval->add_option("--data", data_root, "MAI-layout dataset root")->required();

    auto* ablate = app.add_subcommand("ablate-delta", "sweep the delta hyperparameter");
    ablate->add_option("--config", config_path, "run config JSON")->required();
    ablate->add_option("--deltas", deltas_csv, "comma-separated delta values")->required();
    ablate->add_option("--out", out_dir, "sweep output directory")->required();

    auto* report = app.add_subcommand("report", "re-render report files for a finished run");
    report->add_option("--run", run_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_synth(config_path, out_dir, seed);
        if (train->parsed()) return cmd_train(config_path, out_dir, mode, resume);
        if (eval->parsed()) return cmd_eval(ckpt_path, data_root);
        if (ablate->parsed()) return cmd_ablate(config_path, deltas_csv, out_dir);
        if (report->parsed()) {
            report_from_run_dir(run_dir);
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
