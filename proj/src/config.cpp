#include "scida/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "scida/errors.hpp"
#include "scida/rng.hpp"

using nlohmann::json;

namespace scida {

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

json parse(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("malformed " + what + ": " + e.what());
    }
}

SynthConfig synth_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"k", "side", "source_per_class", "target_count", "min_labels",
                         "max_labels", "jitter", "blur_radius", "downscale", "affinity"},
                        "synthetic config");
    SynthConfig cfg;
    try {
        cfg.k = j.value("k", cfg.k);
        cfg.side = j.value("side", cfg.side);
        cfg.source_per_class = j.value("source_per_class", cfg.source_per_class);
        cfg.target_count = j.value("target_count", cfg.target_count);
        cfg.min_labels = j.value("min_labels", cfg.min_labels);
        cfg.max_labels = j.value("max_labels", cfg.max_labels);
        cfg.jitter = j.value("jitter", cfg.jitter);
        cfg.blur_radius = j.value("blur_radius", cfg.blur_radius);
        cfg.downscale = j.value("downscale", cfg.downscale);
        if (j.contains("affinity")) {
            const auto& rows = j["affinity"];
            cfg.affinity = Mat::Zero(rows.size(), rows.empty() ? 0 : rows[0].size());
            for (std::size_t r = 0; r < rows.size(); ++r)
                for (std::size_t c = 0; c < rows[r].size(); ++c)
                    cfg.affinity(static_cast<int>(r), static_cast<int>(c)) = rows[r][c].get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad synthetic config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json synth_to_json(const SynthConfig& cfg) {
    json j;
    j["k"] = cfg.k;
    j["side"] = cfg.side;
    j["source_per_class"] = cfg.source_per_class;
    j["target_count"] = cfg.target_count;
    j["min_labels"] = cfg.min_labels;
    j["max_labels"] = cfg.max_labels;
    j["jitter"] = cfg.jitter;
    j["blur_radius"] = cfg.blur_radius;
    j["downscale"] = cfg.downscale;
    if (cfg.affinity.size() != 0) {
        json rows = json::array();
        for (int r = 0; r < cfg.affinity.rows(); ++r) {
            json row = json::array();
            for (int c = 0; c < cfg.affinity.cols(); ++c) row.push_back(cfg.affinity(r, c));
            rows.push_back(row);
        }
        j["affinity"] = rows;
    }
    return j;
}

}  // namespace

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::scida: return "scida";
        case RunMode::source_only: return "source_only";
        case RunMode::dwc_only: return "dwc_only";
    }
    return "scida";
}

RunMode run_mode_from_string(const std::string& s) {
    if (s == "scida") return RunMode::scida;
    if (s == "source_only") return RunMode::source_only;
    if (s == "dwc_only") return RunMode::dwc_only;
    throw ConfigError("unknown mode '" + s + "' (expected scida|source_only|dwc_only)");
}

void RunConfig::validate() const {
    const bool has_synth = synthetic.has_value();
    const bool has_mai = !mai_source_root.empty() || !mai_target_root.empty();
    if (has_synth == has_mai)
        throw ConfigError("config must specify exactly one of 'synthetic' or MAI roots");
    if (has_mai && (mai_source_root.empty() || mai_target_root.empty()))
        throw ConfigError("both mai_source_root and mai_target_root are required");
    if (has_synth && synthetic->k != k)
        throw ConfigError("config k does not match synthetic.k");
    if (has_synth && synthetic->side != side)
        throw ConfigError("config side does not match synthetic.side");
    if (k < 2) throw ConfigError("k must be >= 2");
    if (delta <= 0.0 || delta > 1.0) throw ConfigError("delta must be in (0,1]");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (n_inner < 0) throw ConfigError("n_inner must be >= 0");
    if (eps_conv < 0.0) throw ConfigError("eps_conv must be >= 0");
    if (lr_dwc <= 0.0 || lr_lwc <= 0.0) throw ConfigError("learning rates must be positive");
    if (feature_dim < 2 || embed_dim < 1) throw ConfigError("bad feature/embedding dims");
}

std::uint64_t RunConfig::hash() const {
    const std::string s = to_json();
    return fnv1a(s);
}

std::string RunConfig::to_json() const {
    json j;
    if (synthetic) j["synthetic"] = synth_to_json(*synthetic);
    if (!mai_source_root.empty()) {
        j["mai_source_root"] = mai_source_root;
        j["mai_target_root"] = mai_target_root;
    }
    j["k"] = k;
    j["side"] = side;
    j["feature_dim"] = feature_dim;
    j["embed_dim"] = embed_dim;
    j["delta"] = delta;
    j["batch_size"] = batch_size;
    j["lr_dwc"] = lr_dwc;
    j["lr_lwc"] = lr_lwc;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["schedule"] = {{"dwc_decay_epochs", schedule.dwc_decay_epochs},
                     {"lwc_decay_epochs", schedule.lwc_decay_epochs},
                     {"factor", schedule.factor}};
    j["max_epochs"] = max_epochs;
    j["n_inner"] = n_inner;
    j["eps_conv"] = eps_conv;
    j["seed"] = seed;
    j["mode"] = to_string(mode);
    j["focal_alpha"] = focal_alpha;
    j["focal_gamma"] = focal_gamma;
    return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    const json j = parse(text, "run config");
    reject_unknown_keys(
        j, {"synthetic",    "mai_source_root", "mai_target_root", "k",         "side",
            "feature_dim",  "embed_dim",       "delta",           "batch_size", "lr_dwc",
            "lr_lwc",       "momentum",        "weight_decay",    "schedule",   "max_epochs",
            "n_inner",      "eps_conv",        "seed",            "mode",       "focal_alpha",
            "focal_gamma"},
        "run config");
    RunConfig cfg;
    try {
        if (j.contains("synthetic")) cfg.synthetic = synth_from_json(j["synthetic"]);
        cfg.mai_source_root = j.value("mai_source_root", "");
        cfg.mai_target_root = j.value("mai_target_root", "");
        cfg.k = j.value("k", cfg.synthetic ? cfg.synthetic->k : cfg.k);
        cfg.side = j.value("side", cfg.synthetic ? cfg.synthetic->side : cfg.side);
        cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
        cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
        cfg.delta = j.value("delta", cfg.delta);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.lr_dwc = j.value("lr_dwc", cfg.lr_dwc);
        cfg.lr_lwc = j.value("lr_lwc", cfg.lr_lwc);
        cfg.momentum = j.value("momentum", cfg.momentum);
        cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
        if (j.contains("schedule")) {
            reject_unknown_keys(j["schedule"], {"dwc_decay_epochs", "lwc_decay_epochs", "factor"},
                                "schedule");
            cfg.schedule.dwc_decay_epochs =
                j["schedule"].value("dwc_decay_epochs", cfg.schedule.dwc_decay_epochs);
            cfg.schedule.lwc_decay_epochs =
                j["schedule"].value("lwc_decay_epochs", cfg.schedule.lwc_decay_epochs);
            cfg.schedule.factor = j["schedule"].value("factor", cfg.schedule.factor);
        }
        cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
        cfg.n_inner = j.value("n_inner", cfg.n_inner);
        cfg.eps_conv = j.value("eps_conv", cfg.eps_conv);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("mode")) cfg.mode = run_mode_from_string(j["mode"].get<std::string>());
        cfg.focal_alpha = j.value("focal_alpha", cfg.focal_alpha);
        cfg.focal_gamma = j.value("focal_gamma", cfg.focal_gamma);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad run config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

SynthConfig synth_config_from_json_text(const std::string& text) {
    return synth_from_json(parse(text, "synthetic config"));
}

SynthConfig synth_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return synth_config_from_json_text(text);
}

std::string synth_config_to_json(const SynthConfig& cfg) { return synth_to_json(cfg).dump(2); }

}  // namespace scida
