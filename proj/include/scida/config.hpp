#pragma once

#include <optional>
#include <string>

#include "scida/synth.hpp"

namespace scida {

enum class RunMode { scida, source_only, dwc_only };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& s);

struct Schedule {
    int dwc_decay_epochs = 10;  // DWC lr x0.1 every this many epochs
    int lwc_decay_epochs = 40;  // LWC lr x0.1 every this many epochs
    double factor = 0.1;
};

// Fully determines a run: (RunConfig, code version) -> reproducible TrainLog.
struct RunConfig {
    // exactly one dataset source
    std::optional<SynthConfig> synthetic;
    std::string mai_source_root;
    std::string mai_target_root;

    int k = 8;
    int side = 64;
    int feature_dim = 128;
    int embed_dim = 64;
    double delta = 0.2;
    int batch_size = 4;
    double lr_dwc = 0.001;
    double lr_lwc = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    Schedule schedule;
    int max_epochs = 60;
    int n_inner = 4;
    double eps_conv = 0.01;
    std::uint64_t seed = 0;
    RunMode mode = RunMode::scida;
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;

    void validate() const;
    std::uint64_t hash() const;
    std::string to_json() const;

    // Unknown keys are rejected with a ConfigError.
    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::string& path);
};

// Standalone synthetic-dataset config files for `scida gen-synth`.
SynthConfig synth_config_from_json_text(const std::string& text);
SynthConfig synth_config_from_file(const std::string& path);
std::string synth_config_to_json(const SynthConfig& cfg);

}  // namespace scida
