#include "scida/rng.hpp"

#include <sstream>

namespace scida {

double Rng::gaussian() {
    // Explicit Box-Muller instead of std::normal_distribution: the libstdc++
    // implementation caches a second value, which makes serialized engine
    // state insufficient to resume the stream.
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 1e-300);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

int Rng::uniform_int(int lo, int hi) {
    // Rejection-free mapping; bias is negligible for the small ranges used here
    // and the result is identical across platforms, unlike uniform_int_distribution.
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(engine_() % span);
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::deserialize(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::uint64_t sub_seed(std::uint64_t base, const std::string& tag) {
    std::uint64_t h = fnv1a(&base, sizeof(base));
    return fnv1a(tag.data(), tag.size(), h);
}

std::uint64_t sub_seed(std::uint64_t base, const std::string& tag, std::uint64_t index) {
    std::uint64_t h = sub_seed(base, tag);
    return fnv1a(&index, sizeof(index), h);
}

}  // namespace scida
