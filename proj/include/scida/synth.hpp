#pragma once

#include <cstdint>
#include <utility>

#include "scida/dataset.hpp"

namespace scida {

// Synthetic compositing generator. Source images render a single full-frame
// class texture; target images composite several class tiles on a grid and
// pass through a configurable domain shift. Every rendered tile carries a
// class-unique marker pixel so ground truth can be recovered from pixels
// alone.
struct SynthConfig {
    int k = 8;
    int side = 64;
    int source_per_class = 100;
    int target_count = 400;
    int min_labels = 1;
    int max_labels = 4;

    // Domain shift applied to target images only.
    double jitter = 0.15;  // per-channel scale/offset magnitude
    int blur_radius = 1;   // box blur radius in pixels, 0 disables
    int downscale = 2;     // block-average factor, 1 disables

    // Pairwise co-occurrence affinity, K x K symmetric with zero diagonal.
    // Empty means the default ring table.
    Mat affinity;

    void validate() const;  // throws ConfigError
    int grid() const;       // tile grid dimension, derived from max_labels
    Mat effective_affinity() const;
};

// Ring table: class i strongly co-occurs with its neighbours i-1 and i+1.
Mat ring_affinity(int k, double strong = 1.0, double base = 0.15);

// Marker color of class c, exact on the 8-bit grid. The blue channel of all
// non-marker pixels is kept strictly below 255 so markers cannot occur by
// accident.
void marker_color(int c, double rgb[3]);

// Deterministic given (config, seed). Target samples carry their true
// multi-hot labels; callers that train on them must strip labels first.
std::pair<Dataset, Dataset> generate_synthetic_pair(const SynthConfig& config, std::uint64_t seed);

// Copy of a dataset with all labels removed (the trainer's view of the
// target domain).
Dataset strip_labels(const Dataset& dataset);

// Brute-force ground-truth oracle: scan every pixel for class marker colors.
std::vector<int> recover_labels_by_marker(const Vec& pixels, int channels, int side, int k);

}  // namespace scida
