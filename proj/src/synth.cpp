#include "scida/synth.hpp"

#include <cmath>

#include "scida/errors.hpp"
#include "scida/rng.hpp"

namespace scida {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBlueCeiling = 250.0 / 255.0;  // markers own blue = 255

// Quantize to the 8-bit grid so in-memory pixels match a PNG round trip.
double q8(double v) { return std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

struct Rgb {
    double r, g, b;
};

// Evenly spaced hues, full saturation, medium value.
Rgb class_base_color(int c, int k) {
    const double h = 6.0 * c / std::max(k, 1);
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double v = 0.85, p = 0.15;
    const double qd = v - (v - p) * f;
    const double t = p + (v - p) * f;
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {qd, v, p};
        case 2: return {p, v, t};
        case 3: return {p, qd, v};
        case 4: return {t, p, v};
        default: return {v, p, qd};
    }
}

// Procedural texture value in [0,1] at (x, y) for class c.
double texture_value(int c, double x, double y, double phase) {
    const int pattern = c % 4;
    const double freq = 0.08 + 0.02 * (c / 4);
    switch (pattern) {
        case 0:  // horizontal stripes
            return 0.5 + 0.45 * std::sin(2.0 * kPi * (y * freq + phase));
        case 1: {  // checkerboard
            const double p = 1.0 / std::max(freq, 1e-6) * 0.5;
            const int cell = static_cast<int>(std::floor((x + phase * p) / p)) +
                             static_cast<int>(std::floor((y + phase * p) / p));
            return (cell % 2 == 0) ? 0.9 : 0.2;
        }
        case 2: {  // dot lattice
            const double p = 1.0 / std::max(freq, 1e-6) * 0.5;
            const double dx = std::fmod(x + phase * p, p) - p / 2;
            const double dy = std::fmod(y + phase * p, p) - p / 2;
            const double d = std::sqrt(dx * dx + dy * dy) / (p / 2);
            return d < 0.6 ? 0.9 : 0.25;
        }
        default:  // diagonal stripes
            return 0.5 + 0.45 * std::sin(2.0 * kPi * ((x + y) * freq + phase));
    }
}

void render_tile(Vec& img, int side, int c, int k, int x0, int y0, int w, int h, Rng& rng) {
    const Rgb base = class_base_color(c, k);
    const double phase = rng.uniform();
    const double noise_amp = 0.03;
    const int hw = side * side;
    for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
            const double t = texture_value(c, x - x0, y - y0, phase);
            const double n = noise_amp * (rng.uniform() - 0.5);
            img[0 * hw + y * side + x] = std::clamp(base.r * t + n, 0.0, 1.0);
            img[1 * hw + y * side + x] = std::clamp(base.g * t + n, 0.0, 1.0);
            img[2 * hw + y * side + x] = std::clamp(base.b * t + n, 0.0, kBlueCeiling);
        }
    }
}

void box_blur(Vec& img, int side, int radius) {
    if (radius <= 0) return;
    const int hw = side * side;
    Vec tmp(img.size());
    // horizontal then vertical pass
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                double acc = 0.0;
                int n = 0;
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= side) continue;
                    acc += img[c * hw + y * side + xx];
                    ++n;
                }
                tmp[c * hw + y * side + x] = acc / n;
            }
        }
        for (int x = 0; x < side; ++x) {
            for (int y = 0; y < side; ++y) {
                double acc = 0.0;
                int n = 0;
                for (int dy = -radius; dy <= radius; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= side) continue;
                    acc += tmp[c * hw + yy * side + x];
                    ++n;
                }
                img[c * hw + y * side + x] = acc / n;
            }
        }
    }
}

void block_downscale_upscale(Vec& img, int side, int factor) {
    if (factor <= 1 || side % factor != 0) return;
    const int hw = side * side;
    for (int c = 0; c < 3; ++c) {
        for (int by = 0; by < side; by += factor) {
            for (int bx = 0; bx < side; bx += factor) {
                double acc = 0.0;
                for (int y = by; y < by + factor; ++y)
                    for (int x = bx; x < bx + factor; ++x) acc += img[c * hw + y * side + x];
                acc /= factor * factor;
                for (int y = by; y < by + factor; ++y)
                    for (int x = bx; x < bx + factor; ++x) img[c * hw + y * side + x] = acc;
            }
        }
    }
}

void apply_domain_shift(Vec& img, int side, const SynthConfig& cfg, Rng& rng) {
    const int hw = side * side;
    for (int c = 0; c < 3; ++c) {
        const double scale = 1.0 + cfg.jitter * rng.uniform(-1.0, 1.0);
        const double offset = 0.5 * cfg.jitter * rng.uniform(-1.0, 1.0);
        for (int i = 0; i < hw; ++i) {
            double v = img[c * hw + i] * scale + offset;
            img[c * hw + i] = std::clamp(v, 0.0, 1.0);
        }
    }
    box_blur(img, side, cfg.blur_radius);
    block_downscale_upscale(img, side, cfg.downscale);
    for (int i = 0; i < hw; ++i)
        img[2 * hw + i] = std::min(img[2 * hw + i], kBlueCeiling);
}

void stamp_marker(Vec& img, int side, int c, int x, int y) {
    double rgb[3];
    marker_color(c, rgb);
    const int hw = side * side;
    for (int ch = 0; ch < 3; ++ch) img[ch * hw + y * side + x] = rgb[ch];
}

void quantize_image(Vec& img) {
    for (int i = 0; i < img.size(); ++i) img[i] = q8(img[i]);
}

// Affinity-driven label set: first class ~ row sums, each further class
// weighted by its total affinity to the classes already chosen. Stops early
// when no remaining class has positive weight.
std::vector<int> sample_label_set(const Mat& affinity, int n, Rng& rng) {
    const int k = static_cast<int>(affinity.rows());
    std::vector<int> chosen;
    Vec row_sums = affinity.rowwise().sum();
    auto weighted_pick = [&](const Vec& w) -> int {
        const double total = w.sum();
        if (total <= 0.0) return -1;
        double r = rng.uniform() * total;
        for (int i = 0; i < k; ++i) {
            r -= w[i];
            if (r <= 0.0 && w[i] > 0.0) return i;
        }
        for (int i = k - 1; i >= 0; --i)
            if (w[i] > 0.0) return i;
        return -1;
    };
    Vec first = row_sums;
    int pick = weighted_pick(first);
    if (pick < 0) pick = rng.uniform_int(0, k - 1);
    chosen.push_back(pick);
    while (static_cast<int>(chosen.size()) < n) {
        Vec w = Vec::Zero(k);
        for (int j = 0; j < k; ++j) {
            bool taken = false;
            for (int c : chosen) taken = taken || (c == j);
            if (taken) continue;
            for (int c : chosen) w[j] += affinity(j, c);
        }
        const int next = weighted_pick(w);
        if (next < 0) break;
        chosen.push_back(next);
    }
    return chosen;
}

}  // namespace

void SynthConfig::validate() const {
    if (k < 3) throw ConfigError("synth: k must be >= 3");
    if (max_labels > k) throw ConfigError("synth: max_labels exceeds class count");
    if (min_labels < 1 || min_labels > max_labels) throw ConfigError("synth: bad min_labels");
    if (source_per_class <= 0 || target_count <= 0) throw ConfigError("synth: counts must be positive");
    if (side <= 0) throw ConfigError("synth: side must be positive");
    if (side % grid() != 0)
        throw ConfigError("synth: side must be divisible by the tile grid " + std::to_string(grid()));
    if (affinity.size() != 0) {
        if (affinity.rows() != k || affinity.cols() != k)
            throw ConfigError("synth: affinity must be K x K");
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                if (affinity(i, j) < 0.0) throw ConfigError("synth: affinity entries must be >= 0");
                if (std::abs(affinity(i, j) - affinity(j, i)) > 1e-12)
                    throw ConfigError("synth: affinity must be symmetric");
            }
    }
}

int SynthConfig::grid() const {
    int g = 1;
    while (g * g < max_labels) ++g;
    return g;
}

Mat SynthConfig::effective_affinity() const {
    return affinity.size() != 0 ? affinity : ring_affinity(k);
}

Mat ring_affinity(int k, double strong, double base) {
    Mat a = Mat::Constant(k, k, base);
    a.diagonal().setZero();
    for (int i = 0; i < k; ++i) {
        a(i, (i + 1) % k) = strong;
        a((i + 1) % k, i) = strong;
    }
    return a;
}

void marker_color(int c, double rgb[3]) {
    rgb[0] = ((37 * c + 11) % 256) / 255.0;
    rgb[1] = ((91 * c + 53) % 256) / 255.0;
    rgb[2] = 1.0;
}

std::pair<Dataset, Dataset> generate_synthetic_pair(const SynthConfig& config, std::uint64_t seed) {
    config.validate();
    const int k = config.k;
    const int side = config.side;
    const Mat affinity = config.effective_affinity();

    std::vector<std::string> categories;
    for (int c = 0; c < k; ++c) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "class_%02d", c);
        categories.emplace_back(buf);
    }

    Dataset source;
    source.categories = categories;
    source.side = side;
    Rng src_rng(sub_seed(seed, "synth-source"));
    int sid = 0;
    for (int c = 0; c < k; ++c) {
        for (int i = 0; i < config.source_per_class; ++i) {
            ImageSample s;
            s.domain = Domain::source;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "s%05d", sid++);
            s.id = buf;
            s.pixels = Vec::Zero(3 * side * side);
            render_tile(s.pixels, side, c, k, 0, 0, side, side, src_rng);
            stamp_marker(s.pixels, side, c, 0, 0);
            quantize_image(s.pixels);
            s.label = LabelVector::from_indices(k, {c});
            source.samples.push_back(std::move(s));
        }
    }

    Dataset target;
    target.categories = categories;
    target.side = side;
    Rng tgt_rng(sub_seed(seed, "synth-target"));
    const int g = config.grid();
    const int cell = side / g;
    for (int i = 0; i < config.target_count; ++i) {
        const int n = tgt_rng.uniform_int(config.min_labels, config.max_labels);
        std::vector<int> labels = sample_label_set(affinity, n, tgt_rng);

        // Shuffle cells; the first |labels| cells guarantee one tile per label,
        // remaining cells repeat randomly chosen labels.
        std::vector<int> cells(g * g);
        for (int ci = 0; ci < g * g; ++ci) cells[ci] = ci;
        for (int ci = g * g - 1; ci > 0; --ci) std::swap(cells[ci], cells[tgt_rng.uniform_int(0, ci)]);

        ImageSample s;
        s.domain = Domain::target;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "t%05d", i);
        s.id = buf;
        s.pixels = Vec::Zero(3 * side * side);
        std::vector<std::pair<int, int>> marker_slots;  // (class, cell)
        for (int ci = 0; ci < g * g; ++ci) {
            const int li = ci < static_cast<int>(labels.size())
                               ? ci
                               : tgt_rng.uniform_int(0, static_cast<int>(labels.size()) - 1);
            const int c = labels[li];
            const int cx = (cells[ci] % g) * cell;
            const int cy = (cells[ci] / g) * cell;
            render_tile(s.pixels, side, c, k, cx, cy, cell, cell, tgt_rng);
            marker_slots.emplace_back(c, cells[ci]);
        }
        apply_domain_shift(s.pixels, side, config, tgt_rng);
        for (const auto& [c, slot] : marker_slots)
            stamp_marker(s.pixels, side, c, (slot % g) * cell, (slot / g) * cell);
        quantize_image(s.pixels);
        s.label = LabelVector::from_indices(k, labels);
        target.samples.push_back(std::move(s));
    }
    return {std::move(source), std::move(target)};
}

Dataset strip_labels(const Dataset& dataset) {
    Dataset out = dataset;
    for (auto& s : out.samples) s.label.reset();
    return out;
}

std::vector<int> recover_labels_by_marker(const Vec& pixels, int channels, int side, int k) {
    if (channels != 3) throw ShapeError("marker recovery expects 3-channel images");
    const int hw = side * side;
    std::vector<int> found;
    const double tol = 0.5 / 255.0;
    for (int c = 0; c < k; ++c) {
        double rgb[3];
        marker_color(c, rgb);
        bool hit = false;
        for (int i = 0; i < hw && !hit; ++i) {
            hit = std::abs(pixels[0 * hw + i] - rgb[0]) < tol &&
                  std::abs(pixels[1 * hw + i] - rgb[1]) < tol &&
                  std::abs(pixels[2 * hw + i] - rgb[2]) < tol;
        }
        if (hit) found.push_back(c);
    }
    return found;
}

}  // namespace scida
