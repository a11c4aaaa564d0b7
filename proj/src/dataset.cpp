#include "scida/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "scida/errors.hpp"
#include "scida/rng.hpp"

namespace scida {

LabelVector LabelVector::from_indices(int k, const std::vector<int>& positives) {
    LabelVector lv;
    lv.values = Vec::Zero(k);
    for (int idx : positives) {
        if (idx < 0 || idx >= k) throw ConfigError("label index out of range: " + std::to_string(idx));
        lv.values[idx] = 1.0;
    }
    return lv;
}

std::vector<int> LabelVector::positive_indices() const {
    std::vector<int> out;
    for (int i = 0; i < values.size(); ++i)
        if (values[i] > 0.5) out.push_back(i);
    return out;
}

void LabelVector::validate() const {
    if (values.size() == 0) throw ConfigError("empty label vector");
    for (int i = 0; i < values.size(); ++i)
        if (values[i] != 0.0 && values[i] != 1.0)
            throw ConfigError("label entry must be 0 or 1");
}

void ClassFrequency::validate() const {
    for (int i = 0; i < proportions.size(); ++i)
        if (proportions[i] <= 0.0)
            throw ConfigError("class " + std::to_string(i) + " has zero proportion");
    if (std::abs(proportions.sum() - 1.0) > 1e-9)
        throw ConfigError("class proportions do not sum to 1");
}

std::uint64_t Dataset::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& cat : categories) h = fnv1a(cat.data(), cat.size(), h);
    for (const auto& s : samples) {
        h = fnv1a(s.id.data(), s.id.size(), h);
        h = fnv1a(s.pixels.data(), sizeof(double) * s.pixels.size(), h);
        if (s.label) h = fnv1a(s.label->values.data(), sizeof(double) * s.label->values.size(), h);
    }
    return h;
}

ClassFrequency class_frequencies(const Dataset& dataset) {
    if (dataset.size() == 0) throw ConfigError("class_frequencies: empty dataset");
    const int k = dataset.num_classes();
    Vec counts = Vec::Zero(k);
    for (const auto& s : dataset.samples) {
        if (!s.label) throw ConfigError("class_frequencies: dataset contains unlabeled samples");
        counts += s.label->values;
    }
    for (int i = 0; i < k; ++i)
        if (counts[i] == 0.0)
            throw ConfigError("class_frequencies: class '" + dataset.categories[i] + "' never occurs");
    ClassFrequency freq;
    freq.proportions = counts / counts.sum();
    freq.validate();
    return freq;
}

std::vector<int> epoch_order(int size, int epoch, std::uint64_t seed, const std::string& tag) {
    std::vector<int> order(size);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(sub_seed(seed, tag, static_cast<std::uint64_t>(epoch)));
    for (int i = size - 1; i > 0; --i) {
        const int j = rng.uniform_int(0, i);
        std::swap(order[i], order[j]);
    }
    return order;
}

}  // namespace scida
