#pragma once

#include <string>
#include <vector>

#include "scida/model.hpp"

namespace scida {

// Trainer state carried alongside the model parameters so an interrupted run
// resumes bit-exactly.
struct CheckpointExtra {
    int epoch = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t rng_seed = 0;
    int churn_streak = 0;
    Mat corr_counts;  // K x K co-occurrence counts, empty before the first build
    std::vector<std::string> pseudo_ids;
    std::vector<std::vector<int>> pseudo_positives;  // aligned with pseudo_ids
    std::string rng_state;
};

// Binary blob (magic "SCIDA1") plus a JSON sidecar {epoch, config_hash,
// rng_seed} at <path>.json.
void save_checkpoint(const std::string& path, ScidaModel& model, const CheckpointExtra& extra);

// The model must already be constructed with the same configuration; its
// parameters, momentum buffers, embedding and adjacency are overwritten.
CheckpointExtra load_checkpoint(const std::string& path, ScidaModel& model);

}  // namespace scida
