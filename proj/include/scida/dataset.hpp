#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace scida {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Domain { source, target };

// Multi-hot label assignment over K classes. Entries are exactly 0 or 1.
struct LabelVector {
    Vec values;

    int num_classes() const { return static_cast<int>(values.size()); }
    int num_positive() const { return static_cast<int>(values.sum() + 0.5); }
    bool is_single_label() const { return num_positive() == 1; }

    static LabelVector from_indices(int k, const std::vector<int>& positives);
    std::vector<int> positive_indices() const;
    void validate() const;  // throws ConfigError on non-{0,1} entries or empty vector
};

// One image. Pixels are channel-major (c, y, x), scaled to [0,1].
struct ImageSample {
    Vec pixels;
    std::optional<LabelVector> label;
    Domain domain = Domain::source;
    std::string id;
};

// proportions[beta] = share of positive annotations belonging to class beta.
struct ClassFrequency {
    Vec proportions;
    void validate() const;  // positivity and sum-to-1 within 1e-9
};

// Immutable after construction; safe to read from multiple threads.
struct Dataset {
    std::vector<std::string> categories;  // lexicographically sorted
    int side = 0;
    int channels = 3;
    std::vector<ImageSample> samples;

    int num_classes() const { return static_cast<int>(categories.size()); }
    int size() const { return static_cast<int>(samples.size()); }
    int pixel_count() const { return channels * side * side; }

    // Content hash over pixels, labels and ids; used for determinism checks.
    std::uint64_t content_hash() const;
};

// Paired source/target minibatch. Target ground truth never enters a batch.
struct DomainBatch {
    Mat source_images;   // B x (C*H*W)
    Mat source_labels;   // B x K
    Mat target_images;   // B x (C*H*W)
    std::vector<std::string> target_ids;

    int batch_size() const { return static_cast<int>(source_images.rows()); }
    bool has_source() const { return source_images.rows() > 0; }
    bool has_target() const { return target_images.rows() > 0; }
};

// Positive-annotation proportions. Throws ConfigError if the dataset is
// empty, unlabeled, or a class never occurs.
ClassFrequency class_frequencies(const Dataset& dataset);

// Deterministic batch order for a given epoch: a pure function of
// (size, epoch, seed), so prefetching and resume cannot change it.
std::vector<int> epoch_order(int size, int epoch, std::uint64_t seed, const std::string& tag);

}  // namespace scida
