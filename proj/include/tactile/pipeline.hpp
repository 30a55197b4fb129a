#pragma once

// Splitting, bucketed oversampling, frame augmentation and resizing.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "tactile/contact.hpp"
#include "tactile/dataset.hpp"

namespace tactile {

// ---------------------------------------------------------------------------
// Seeding

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Independent stream seed from a base seed and any number of tags.
template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, const Tags&... tags) {
    std::uint64_t s = splitmix64(base);
    auto mix = [&s](std::uint64_t v) { s = splitmix64(s ^ v); };
    auto one = [&mix](const auto& t) {
        if constexpr (std::is_convertible_v<decltype(t), std::string_view>)
            mix(hash_string(t));
        else
            mix(static_cast<std::uint64_t>(t));
    };
    (one(tags), ...);
    return s;
}

/// Uniform integer in [0, n) by rejection, identical on every platform.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do x = rng();
    while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

/// Fisher-Yates with uniform_index, so results do not depend on the standard library.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Box-Muller standard normal.
inline double standard_normal(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// Splits

enum class SplitMode { SeenObject, UnseenObject };

inline std::string to_string(SplitMode m) { return m == SplitMode::SeenObject ? "seen" : "unseen"; }

inline SplitMode parse_split_mode(const std::string& s) {
    const auto l = lowercase(s);
    if (l == "seen" || l == "seenobject" || l == "seen_object") return SplitMode::SeenObject;
    if (l == "unseen" || l == "unseenobject" || l == "unseen_object") return SplitMode::UnseenObject;
    fail(ErrorKind::InvalidArgument, "unknown split mode '" + s + "' (expected seen or unseen)");
}

struct SplitSet {
    SplitMode mode = SplitMode::SeenObject;
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;

    bool operator==(const SplitSet&) const = default;
};

inline constexpr double kTestFraction = 0.2;
inline constexpr double kValidationFraction = 0.2;  // of what remains after test

/// floor(20% n) test, floor(20% of the remainder) validation, rest train.
inline std::array<std::size_t, 3> split_sizes(std::size_t n) {
    const auto test = static_cast<std::size_t>(std::floor(kTestFraction * static_cast<double>(n)));
    const auto val = static_cast<std::size_t>(std::floor(kValidationFraction * static_cast<double>(n - test)));
    return {n - test - val, val, test};
}

inline SplitSet split(const Catalog& catalog, SplitMode mode, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, "split"));
    SplitSet out;
    out.mode = mode;
    if (mode == SplitMode::SeenObject) {
        std::vector<std::string> ids;
        for (const auto& g : catalog.grasps) ids.push_back(g.grasp_id);
        std::sort(ids.begin(), ids.end());
        shuffle(ids, rng);
        const auto [n_train, n_val, n_test] = split_sizes(ids.size());
        out.test.assign(ids.begin(), ids.begin() + static_cast<long>(n_test));
        out.validation.assign(ids.begin() + static_cast<long>(n_test), ids.begin() + static_cast<long>(n_test + n_val));
        out.train.assign(ids.begin() + static_cast<long>(n_test + n_val), ids.end());
    } else {
        std::map<std::string, std::vector<std::string>> by_object;
        for (const auto& g : catalog.grasps) by_object[g.object_id].push_back(g.grasp_id);
        require(by_object.size() >= 5, ErrorKind::TooFewObjects,
                "unseen-object split needs at least 5 objects, got " + std::to_string(by_object.size()));
        std::vector<std::string> objects;
        for (const auto& [oid, gs] : by_object) objects.push_back(oid);
        shuffle(objects, rng);
        const auto [n_train, n_val, n_test] = split_sizes(objects.size());
        for (std::size_t i = 0; i < objects.size(); ++i) {
            auto& dest = i < n_test ? out.test : (i < n_test + n_val ? out.validation : out.train);
            for (const auto& gid : by_object[objects[i]]) dest.push_back(gid);
        }
    }
    for (auto* list : {&out.train, &out.validation, &out.test}) std::sort(list->begin(), list->end());
    return out;
}

/// Empty string when the split is consistent with the catalog.
inline std::string check_split(const SplitSet& s, const Catalog& c) {
    std::map<std::string, std::string> owner;
    for (const auto& g : c.grasps) owner[g.grasp_id] = g.object_id;
    std::map<std::string, int> seen;
    for (const auto* list : {&s.train, &s.validation, &s.test})
        for (const auto& gid : *list) {
            if (!owner.count(gid)) return "grasp " + gid + " not in catalog";
            if (seen[gid]++) return "grasp " + gid + " appears in more than one list";
        }
    if (s.mode == SplitMode::UnseenObject) {
        std::set<std::string> train_objects;
        for (const auto& gid : s.train) train_objects.insert(owner[gid]);
        for (const auto* list : {&s.validation, &s.test})
            for (const auto& gid : *list)
                if (train_objects.count(owner[gid])) return "object " + owner[gid] + " appears in train and held-out lists";
    }
    return {};
}

inline std::string split_to_json(const SplitSet& s) {
    nlohmann::ordered_json j;
    j["mode"] = to_string(s.mode);
    j["train"] = s.train;
    j["validation"] = s.validation;
    j["test"] = s.test;
    return j.dump(2) + "\n";
}

inline SplitSet split_from_json(const std::string& text) {
    SplitSet s;
    try {
        const auto j = nlohmann::json::parse(text);
        s.mode = parse_split_mode(j.at("mode").get<std::string>());
        s.train = j.at("train").get<std::vector<std::string>>();
        s.validation = j.at("validation").get<std::vector<std::string>>();
        s.test = j.at("test").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::MalformedRow, std::string("split file: ") + e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Balancing

inline constexpr int kBuckets = 9;

struct BalanceConfig {
    int t_balance = 500;
    std::array<double, kBuckets + 1> bucket_edges{3, 4, 5, 6, 7, 8, 9, 10, 11, 12};

    void validate() const {
        require(t_balance >= 1, ErrorKind::InvalidArgument, "t_balance must be >= 1");
        require(std::is_sorted(bucket_edges.begin(), bucket_edges.end()) &&
                    std::adjacent_find(bucket_edges.begin(), bucket_edges.end()) == bucket_edges.end(),
                ErrorKind::InvalidArgument, "bucket edges must be strictly increasing");
    }
};

/// Bucket of log10(modulus); values outside the edges go to the end buckets.
inline int bucket_of(double modulus_pa, const BalanceConfig& cfg = {}) {
    const double l = std::log10(modulus_pa);
    for (int b = 1; b < kBuckets; ++b)
        if (l < cfg.bucket_edges[b]) return b - 1;
    return kBuckets - 1;
}

inline std::array<std::size_t, kBuckets> bucket_histogram(const std::vector<std::string>& ids, const Catalog& c, const BalanceConfig& cfg = {}) {
    std::map<std::string, double> modulus;
    for (const auto& g : c.grasps) modulus[g.grasp_id] = c.object_of(g).young_modulus_pa;
    std::array<std::size_t, kBuckets> h{};
    for (const auto& id : ids) {
        auto it = modulus.find(id);
        require(it != modulus.end(), ErrorKind::UnknownKey, "unknown grasp_id " + id);
        ++h[bucket_of(it->second, cfg)];
    }
    return h;
}

/// Oversamples every nonempty bucket with replacement up to t_balance members.
/// All inputs are kept; the output order is a seeded shuffle.
inline std::vector<std::string> balance(const std::vector<std::string>& ids, const Catalog& c, const BalanceConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::map<std::string, double> modulus;
    for (const auto& g : c.grasps) modulus[g.grasp_id] = c.object_of(g).young_modulus_pa;
    std::array<std::vector<std::string>, kBuckets> buckets;
    for (const auto& id : ids) {
        auto it = modulus.find(id);
        require(it != modulus.end(), ErrorKind::UnknownKey, "unknown grasp_id " + id);
        buckets[bucket_of(it->second, cfg)].push_back(id);
    }
    std::mt19937_64 rng(derive_seed(seed, "balance"));
    std::vector<std::string> out = ids;
    for (const auto& members : buckets) {
        if (members.empty()) continue;
        for (std::size_t n = members.size(); n < static_cast<std::size_t>(cfg.t_balance); ++n)
            out.push_back(members[uniform_index(rng, members.size())]);
    }
    shuffle(out, rng);
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentConfig {
    double flip_prob = 0.5;
    double gaussian_sigma = 0.02;
    double brightness = 0.4;
    double contrast = 0.4;
    double saturation = 0.4;
    double hue = 0.1;

    void validate() const {
        require(flip_prob >= 0 && flip_prob <= 1, ErrorKind::InvalidArgument, "flip_prob must lie in [0,1]");
        require(gaussian_sigma >= 0 && gaussian_sigma <= 1, ErrorKind::InvalidArgument, "gaussian_sigma must lie in [0,1]");
        require(brightness >= 0 && contrast >= 0 && saturation >= 0 && hue >= 0 && hue <= 0.5, ErrorKind::InvalidArgument,
                "jitter ranges must be >= 0 and hue <= 0.5");
    }

    static AugmentConfig none() { return {0, 0, 0, 0, 0, 0}; }
};

namespace detail {

inline void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
    v = mx;
    s = mx > 0 ? d / mx : 0.0f;
    if (d <= 0) {
        h = 0;
        return;
    }
    if (mx == r)
        h = (g - b) / d;
    else if (mx == g)
        h = 2.0f + (b - r) / d;
    else
        h = 4.0f + (r - g) / d;
    h /= 6.0f;
    if (h < 0) h += 1.0f;
}

inline void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    h = h - std::floor(h);
    const float x = h * 6.0f;
    const int i = static_cast<int>(x) % 6;
    const float f = x - std::floor(x);
    const float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: r = v, g = t, b = p; break;
        case 1: r = q, g = v, b = p; break;
        case 2: r = p, g = v, b = t; break;
        case 3: r = p, g = q, b = v; break;
        case 4: r = t, g = p, b = v; break;
        default: r = v, g = p, b = q; break;
    }
}

inline float gray(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

}  // namespace detail

/// Flip decisions come from `seed` alone, so every frame of a grasp augmented
/// with the same seed is flipped the same way. Noise and jitter draw from a
/// stream derived from (seed, timestamp_index).
inline TactileFrame augment(const TactileFrame& in, const AugmentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 flip_rng(derive_seed(seed, "flip"));
    const bool flip_h = uniform01(flip_rng) < cfg.flip_prob;
    const bool flip_v = uniform01(flip_rng) < cfg.flip_prob;
    std::mt19937_64 rng(derive_seed(seed, "frame", in.timestamp_index));

    TactileFrame out = in;
    const int h = in.height, w = in.width;
    if (flip_h || flip_v)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = in.at(flip_v ? h - 1 - y : y, flip_h ? w - 1 - x : x, c);

    if (cfg.gaussian_sigma > 0)
        for (auto& p : out.pixels) p += static_cast<float>(cfg.gaussian_sigma * standard_normal(rng));

    const auto factor = [&rng](double range) { return range > 0 ? static_cast<float>(uniform(rng, std::max(0.0, 1 - range), 1 + range)) : 1.0f; };
    const float fb = factor(cfg.brightness);
    const float fc = factor(cfg.contrast);
    const float fs = factor(cfg.saturation);
    const float fh = cfg.hue > 0 ? static_cast<float>(uniform(rng, -cfg.hue, cfg.hue)) : 0.0f;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    if (fb != 1.0f)
        for (auto& p : out.pixels) p = std::clamp(p * fb, 0.0f, 1.0f);
    if (fc != 1.0f) {
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i) mean += detail::gray(out.pixels[3 * i], out.pixels[3 * i + 1], out.pixels[3 * i + 2]);
        const float m = static_cast<float>(mean / static_cast<double>(n));
        for (auto& p : out.pixels) p = std::clamp(m + fc * (p - m), 0.0f, 1.0f);
    }
    if (fs != 1.0f)
        for (std::size_t i = 0; i < n; ++i) {
            float* px = &out.pixels[3 * i];
            const float g = detail::gray(px[0], px[1], px[2]);
            for (int c = 0; c < 3; ++c) px[c] = std::clamp(g + fs * (px[c] - g), 0.0f, 1.0f);
        }
    if (fh != 0.0f)
        for (std::size_t i = 0; i < n; ++i) {
            float* px = &out.pixels[3 * i];
            float hh, ss, vv;
            detail::rgb_to_hsv(std::clamp(px[0], 0.0f, 1.0f), std::clamp(px[1], 0.0f, 1.0f), std::clamp(px[2], 0.0f, 1.0f), hh, ss, vv);
            detail::hsv_to_rgb(hh + fh, ss, vv, px[0], px[1], px[2]);
        }
    for (auto& p : out.pixels) p = std::clamp(p, 0.0f, 1.0f);
    return out;
}

inline std::array<TactileFrame, 3> augment_grasp(const std::array<TactileFrame, 3>& frames, const AugmentConfig& cfg, std::uint64_t seed) {
    return {augment(frames[0], cfg, seed), augment(frames[1], cfg, seed), augment(frames[2], cfg, seed)};
}

/// Area-averaging resize to size x size. Exact block means when the source is
/// a multiple of the target; fractional overlap weights otherwise.
inline TactileFrame resize_box(const TactileFrame& in, int size) {
    if (in.height == size && in.width == size) return in;
    TactileFrame out;
    out.height = out.width = size;
    out.timestamp_index = in.timestamp_index;
    out.pixels.assign(static_cast<std::size_t>(size) * size * 3, 0.0f);
    const double sy = static_cast<double>(in.height) / size, sx = static_cast<double>(in.width) / size;
    for (int oy = 0; oy < size; ++oy) {
        const double y0 = oy * sy, y1 = y0 + sy;
        for (int ox = 0; ox < size; ++ox) {
            const double x0 = ox * sx, x1 = x0 + sx;
            double acc[3] = {0, 0, 0}, wsum = 0;
            for (int y = static_cast<int>(y0); y < std::min(in.height, static_cast<int>(std::ceil(y1))); ++y) {
                const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
                if (wy <= 0) continue;
                for (int x = static_cast<int>(x0); x < std::min(in.width, static_cast<int>(std::ceil(x1))); ++x) {
                    const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
                    if (wx <= 0) continue;
                    for (int c = 0; c < 3; ++c) acc[c] += wy * wx * in.at(y, x, c);
                    wsum += wy * wx;
                }
            }
            for (int c = 0; c < 3; ++c) out.at(oy, ox, c) = static_cast<float>(acc[c] / wsum);
        }
    }
    return out;
}

}  // namespace tactile
