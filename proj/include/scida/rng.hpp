#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace scida {

// Deterministic random stream. All randomness in the project flows through
// named sub-streams derived from a base seed, so any phase of a run can be
// reproduced in isolation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return dist_(engine_); }  // [0,1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double gaussian();
    int uniform_int(int lo, int hi);  // inclusive bounds

    std::mt19937_64& engine() { return engine_; }

    std::string serialize() const;
    void deserialize(const std::string& state);

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> dist_{0.0, 1.0};
};

// Stable 64-bit hash (FNV-1a) used for sub-seed derivation and content hashes.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t fnv1a(const std::string& s);

// Derive an independent seed for a named component of a run.
std::uint64_t sub_seed(std::uint64_t base, const std::string& tag);
std::uint64_t sub_seed(std::uint64_t base, const std::string& tag, std::uint64_t index);

}  // namespace scida
