#pragma once

#include <string>

#include "scida/dataset.hpp"

namespace scida {

// MAI directory layout:
//   <root>/images/<id>.png|.jpg
//   <root>/annotations.json   {"categories": [...], "samples": [{"id", "labels": [...]}]}
//   <root>/manifest.json      {"num_images": int, "num_categories": int}
// Unannotated target roots keep their evaluation labels in a separate
// eval_annotations.json that the trainer never reads.
enum class MaiSplit { train, eval };

// Load a dataset, resizing every image to `side`. Category order is the
// lexicographically sorted category names. Throws LoadError naming the
// offending entry on any schema violation.
Dataset load_mai(const std::string& root, MaiSplit split, int side);

// How labels are written to disk.
enum class LabelPolicy {
    with_labels,   // labels go into annotations.json (source domain)
    hidden_labels  // annotations.json gets empty label lists; the true labels
                   // go to eval_annotations.json (target domain)
};

void save_mai(const Dataset& dataset, const std::string& root, LabelPolicy policy);

}  // namespace scida
