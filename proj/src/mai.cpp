#include "scida/mai.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "scida/errors.hpp"
#include "scida/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scida {

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("missing file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw LoadError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

fs::path find_image(const fs::path& images_dir, const std::string& id) {
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        fs::path p = images_dir / (id + ext);
        if (fs::exists(p)) return p;
    }
    throw LoadError("image file absent for sample '" + id + "'");
}

}  // namespace

Dataset load_mai(const std::string& root, MaiSplit split, int side) {
    const fs::path rootp(root);
    const char* ann_name = split == MaiSplit::eval ? "eval_annotations.json" : "annotations.json";
    fs::path ann_path = rootp / ann_name;
    if (split == MaiSplit::eval && !fs::exists(ann_path)) ann_path = rootp / "annotations.json";

    const json ann = read_json_file(ann_path);
    if (!ann.contains("categories") || !ann.contains("samples"))
        throw LoadError("annotation file lacks categories/samples: " + ann_path.string());

    std::vector<std::string> categories = ann["categories"].get<std::vector<std::string>>();
    if (categories.empty()) throw LoadError("annotation file has no categories: " + ann_path.string());
    std::sort(categories.begin(), categories.end());
    std::map<std::string, int> index;
    for (int i = 0; i < static_cast<int>(categories.size()); ++i) index[categories[i]] = i;

    if (ann["samples"].empty()) throw LoadError("annotation file has no samples: " + ann_path.string());

    Dataset ds;
    ds.categories = categories;
    ds.side = side;

    const fs::path images_dir = rootp / "images";
    for (const auto& item : ann["samples"]) {
        ImageSample s;
        s.id = item.at("id").get<std::string>();
        const auto names = item.at("labels").get<std::vector<std::string>>();
        if (!names.empty()) {
            std::vector<int> idx;
            for (const auto& name : names) {
                auto it = index.find(name);
                if (it == index.end())
                    throw LoadError("unknown category '" + name + "' in sample '" + s.id + "'");
                idx.push_back(it->second);
            }
            s.label = LabelVector::from_indices(ds.num_classes(), idx);
        }
        s.pixels = read_image(find_image(images_dir, s.id).string(), ds.channels, side);
        ds.samples.push_back(std::move(s));
    }

    const fs::path manifest_path = rootp / "manifest.json";
    if (fs::exists(manifest_path)) {
        const json manifest = read_json_file(manifest_path);
        const int n_img = manifest.at("num_images").get<int>();
        const int n_cat = manifest.at("num_categories").get<int>();
        if (n_img != ds.size())
            throw LoadError("manifest expects " + std::to_string(n_img) + " images, found " +
                            std::to_string(ds.size()));
        if (n_cat != ds.num_classes())
            throw LoadError("manifest expects " + std::to_string(n_cat) + " categories, found " +
                            std::to_string(ds.num_classes()));
    }
    return ds;
}

void save_mai(const Dataset& dataset, const std::string& root, LabelPolicy policy) {
    const fs::path rootp(root);
    fs::create_directories(rootp / "images");

    auto labels_of = [&](const ImageSample& s) {
        json names = json::array();
        if (s.label)
            for (int idx : s.label->positive_indices()) names.push_back(dataset.categories[idx]);
        return names;
    };

    json ann;
    ann["categories"] = dataset.categories;
    ann["samples"] = json::array();
    json eval_ann;
    eval_ann["categories"] = dataset.categories;
    eval_ann["samples"] = json::array();

    for (const auto& s : dataset.samples) {
        write_png((rootp / "images" / (s.id + ".png")).string(), s.pixels, dataset.channels,
                  dataset.side);
        json entry;
        entry["id"] = s.id;
        entry["labels"] = policy == LabelPolicy::with_labels ? labels_of(s) : json::array();
        ann["samples"].push_back(entry);
        if (policy == LabelPolicy::hidden_labels) {
            json eentry;
            eentry["id"] = s.id;
            eentry["labels"] = labels_of(s);
            eval_ann["samples"].push_back(eentry);
        }
    }

    std::ofstream(rootp / "annotations.json") << ann.dump(2) << "\n";
    if (policy == LabelPolicy::hidden_labels)
        std::ofstream(rootp / "eval_annotations.json") << eval_ann.dump(2) << "\n";

    json manifest;
    manifest["num_images"] = dataset.size();
    manifest["num_categories"] = dataset.num_classes();
    std::ofstream(rootp / "manifest.json") << manifest.dump(2) << "\n";
}

}  // namespace scida
