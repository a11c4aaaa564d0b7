#include "scida/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "scida/errors.hpp"

namespace scida {

namespace {

constexpr char kMagic[] = "SCIDA1";

void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_i32(std::ostream& os, std::int32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_string(std::ostream& os, const std::string& s) {
    write_i32(os, static_cast<std::int32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_mat(std::ostream& os, const Mat& m) {
    write_i32(os, static_cast<std::int32_t>(m.rows()));
    write_i32(os, static_cast<std::int32_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()), sizeof(double) * m.size());
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
std::int32_t read_i32(std::istream& is) {
    std::int32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::string read_string(std::istream& is) {
    const auto len = read_i32(is);
    std::string s(static_cast<std::size_t>(len), '\0');
    is.read(s.data(), len);
    return s;
}
Mat read_mat(std::istream& is) {
    const auto rows = read_i32(is);
    const auto cols = read_i32(is);
    Mat m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()), sizeof(double) * m.size());
    return m;
}

}  // namespace

void save_checkpoint(const std::string& path, ScidaModel& model, const CheckpointExtra& extra) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw LoadError("cannot write checkpoint: " + path);
    os.write(kMagic, sizeof(kMagic) - 1);
    write_i32(os, 1);  // format version
    write_i32(os, extra.epoch);
    write_u64(os, extra.config_hash);
    write_u64(os, extra.rng_seed);
    write_i32(os, extra.churn_streak);
    write_string(os, extra.rng_state);

    const auto params = model.all_params();
    write_i32(os, static_cast<std::int32_t>(params.size()));
    for (const Param* p : params) {
        write_string(os, p->name);
        write_mat(os, p->value);
        write_mat(os, p->vel);
    }
    write_mat(os, model.label_embedding);
    write_mat(os, model.adjacency);
    write_mat(os, extra.corr_counts);

    write_i32(os, static_cast<std::int32_t>(extra.pseudo_ids.size()));
    for (std::size_t i = 0; i < extra.pseudo_ids.size(); ++i) {
        write_string(os, extra.pseudo_ids[i]);
        write_i32(os, static_cast<std::int32_t>(extra.pseudo_positives[i].size()));
        for (int idx : extra.pseudo_positives[i]) write_i32(os, idx);
    }
    if (!os) throw LoadError("checkpoint write failed: " + path);

    nlohmann::json sidecar;
    sidecar["epoch"] = extra.epoch;
    sidecar["config_hash"] = extra.config_hash;
    sidecar["rng_seed"] = extra.rng_seed;
    std::ofstream(path + ".json") << sidecar.dump(2) << "\n";
}

CheckpointExtra load_checkpoint(const std::string& path, ScidaModel& model) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot read checkpoint: " + path);
    char magic[sizeof(kMagic) - 1];
    is.read(magic, sizeof(magic));
    if (std::string(magic, sizeof(magic)) != kMagic)
        throw LoadError("not a SCIDA checkpoint: " + path);
    const auto version = read_i32(is);
    if (version != 1) throw LoadError("unsupported checkpoint version");

    CheckpointExtra extra;
    extra.epoch = read_i32(is);
    extra.config_hash = read_u64(is);
    extra.rng_seed = read_u64(is);
    extra.churn_streak = read_i32(is);
    extra.rng_state = read_string(is);

    const auto count = read_i32(is);
    auto params = model.all_params();
    if (count != static_cast<std::int32_t>(params.size()))
        throw LoadError("checkpoint parameter count mismatch (wrong model config?)");
    for (Param* p : params) {
        const std::string name = read_string(is);
        if (name != p->name) throw LoadError("checkpoint parameter order mismatch at " + name);
        Mat value = read_mat(is);
        Mat vel = read_mat(is);
        if (value.rows() != p->value.rows() || value.cols() != p->value.cols())
            throw LoadError("checkpoint shape mismatch at " + name);
        p->value = std::move(value);
        p->vel = std::move(vel);
        p->grad.setZero();
    }
    model.label_embedding = read_mat(is);
    model.adjacency = read_mat(is);
    extra.corr_counts = read_mat(is);

    const auto n_pseudo = read_i32(is);
    extra.pseudo_ids.resize(n_pseudo);
    extra.pseudo_positives.resize(n_pseudo);
    for (std::int32_t i = 0; i < n_pseudo; ++i) {
        extra.pseudo_ids[i] = read_string(is);
        const auto n_pos = read_i32(is);
        extra.pseudo_positives[i].resize(n_pos);
        for (std::int32_t j = 0; j < n_pos; ++j) extra.pseudo_positives[i][j] = read_i32(is);
    }
    if (!is) throw LoadError("truncated checkpoint: " + path);
    return extra;
}

}  // namespace scida
