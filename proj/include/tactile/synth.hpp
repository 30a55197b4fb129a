#pragma once

// Synthetic catalogs: log-uniform moduli, Hertz-law grasps that close until
// 60 N or the indentation cap, and paraboloid imprint renderings.

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include <json.hpp>

#include "tactile/contact.hpp"
#include "tactile/dataset.hpp"
#include "tactile/pipeline.hpp"

namespace tactile {

struct SynthConfig {
    int num_objects = 200;
    int grasps_per_object = 5;
    double log10_min = 4.0;
    double log10_max = 9.0;
    std::array<double, 5> shape_mix{0.2, 0.2, 0.2, 0.2, 0.2};  // sphere, cylinder, rectangular, hex, irregular
    int image_size = 64;
    double radius_min_m = 0.009;
    double radius_max_m = 0.011;
    double width0_min_m = 0.08;
    double width0_max_m = 0.10;
    int samples = 30;
    double max_indentation_m = 0.03;  // also the gel thickness used to scale depth
    double fov_half_m = 0.025;
    double force_noise_n = 0.0;
    double width_noise_m = 0.0;
    double pixel_noise = 0.0;
    // objects stiffer than the sensor get extra force noise on top of the
    // indentation plateau the sensor compliance already imposes
    bool stiff_saturation = true;
    double plateau_noise_n = 0.5;
    bool estimates = true;
    std::uint64_t seed = 0;

    void validate() const {
        require(num_objects >= 1 && grasps_per_object >= 1, ErrorKind::InvalidArgument, "need at least one object and one grasp per object");
        require(log10_min <= log10_max && log10_min >= 3 && log10_max <= 12, ErrorKind::InvalidArgument, "modulus range must lie within [3, 12]");
        double total = 0;
        for (double p : shape_mix) {
            require(p >= 0, ErrorKind::InvalidArgument, "shape proportions must be >= 0");
            total += p;
        }
        require(std::abs(total - 1.0) < 1e-9, ErrorKind::InvalidArgument, "shape proportions must sum to 1");
        require(image_size >= 4, ErrorKind::InvalidArgument, "image_size must be >= 4");
        require(radius_min_m > 0 && radius_min_m <= radius_max_m, ErrorKind::InvalidArgument, "radius range must be positive and nonempty");
        require(width0_min_m > 0 && width0_min_m <= width0_max_m, ErrorKind::InvalidArgument, "width range must be positive and nonempty");
        require(2 * max_indentation_m < width0_min_m, ErrorKind::InvalidArgument, "indentation cap must leave positive width");
        require(samples >= 3, ErrorKind::InvalidArgument, "samples must be >= 3");
        require(fov_half_m > 0 && max_indentation_m > 0, ErrorKind::InvalidArgument, "geometry must be positive");
        require(force_noise_n >= 0 && width_noise_m >= 0 && pixel_noise >= 0 && plateau_noise_n >= 0, ErrorKind::InvalidArgument, "noise levels must be >= 0");
        require(width_noise_m * 2 <= kWidthJitterM, ErrorKind::InvalidArgument, "width noise exceeds the width jitter tolerance");
    }
};

inline nlohmann::ordered_json synth_config_json(const SynthConfig& c) {
    nlohmann::ordered_json j;
    j["num_objects"] = c.num_objects;
    j["grasps_per_object"] = c.grasps_per_object;
    j["log10_min"] = c.log10_min;
    j["log10_max"] = c.log10_max;
    j["shape_mix"] = c.shape_mix;
    j["image_size"] = c.image_size;
    j["radius_min_m"] = c.radius_min_m;
    j["radius_max_m"] = c.radius_max_m;
    j["width0_min_m"] = c.width0_min_m;
    j["width0_max_m"] = c.width0_max_m;
    j["samples"] = c.samples;
    j["max_indentation_m"] = c.max_indentation_m;
    j["fov_half_m"] = c.fov_half_m;
    j["force_noise_n"] = c.force_noise_n;
    j["width_noise_m"] = c.width_noise_m;
    j["pixel_noise"] = c.pixel_noise;
    j["stiff_saturation"] = c.stiff_saturation;
    j["plateau_noise_n"] = c.plateau_noise_n;
    j["estimates"] = c.estimates;
    j["seed"] = c.seed;
    return j;
}

/// Material class from the modulus: foam for the softest, metal for the hardest.
inline Material material_for(double modulus_pa) {
    const double l = std::log10(modulus_pa);
    if (l < 5.0) return Material::Foam;
    if (l < 6.5) return Material::Rubber;
    if (l < 8.0) return Material::Food;
    if (l < 9.5) return Material::Plastic;
    if (l < 10.5) return Material::Wood;
    if (l < 11.0) return Material::Glass;
    if (l < 11.5) return Material::Ceramic;
    return Material::Metal;
}

inline std::string synth_object_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "obj%05d", index);
    return buf;
}

inline ObjectMeta synth_object(const SynthConfig& cfg, std::mt19937_64& rng, int index = 0) {
    ObjectMeta m;
    m.object_id = synth_object_id(index);
    m.young_modulus_pa = cfg.log10_min == cfg.log10_max ? std::pow(10.0, cfg.log10_min) : std::pow(10.0, uniform(rng, cfg.log10_min, cfg.log10_max));
    const double u = uniform01(rng);
    double acc = 0;
    m.shape = Shape::Irregular;
    for (std::size_t i = 0; i < kShapes.size(); ++i) {
        acc += cfg.shape_mix[i];
        if (u < acc) {
            m.shape = kShapes[i];
            break;
        }
    }
    // a zero-weight trailing shape must never be chosen through rounding
    if (cfg.shape_mix[static_cast<int>(m.shape)] == 0)
        for (int i = static_cast<int>(kShapes.size()) - 1; i >= 0; --i)
            if (cfg.shape_mix[i] > 0) {
                m.shape = kShapes[i];
                break;
            }
    m.material = material_for(m.young_modulus_pa);
    m.name = "synthetic " + to_string(m.material) + " " + to_string(m.shape) + " " + std::to_string(index);
    return m;
}

/// Per-object geometry, a pure function of (config seed, object id).
struct ObjectGeometry {
    double radius_m = 0;
    double phase = 0;  // irregular outline orientation
};

inline ObjectGeometry object_geometry(const ObjectMeta& m, const SynthConfig& cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, "geometry", m.object_id));
    ObjectGeometry g;
    g.radius_m = uniform(rng, cfg.radius_min_m, cfg.radius_max_m);
    g.phase = uniform(rng, 0, 2 * std::numbers::pi);
    return g;
}

/// Squared "radius" of the point (x, y) for the shape's outline metric, and the
/// local curvature radius. Depth is max(0, d - r2 / (2 R)).
inline double shape_r2(Shape s, double x, double y, const ObjectGeometry& g) {
    switch (s) {
        case Shape::Sphere: return x * x + y * y;
        case Shape::Cylinder: return x * x;
        case Shape::Rectangular: {
            const double m = std::max(std::abs(x), std::abs(y));
            return m * m;
        }
        case Shape::Hex: {
            const double m = std::max(std::abs(x), std::abs(x) / 2 + std::abs(y) * std::sqrt(3.0) / 2);
            return m * m;
        }
        case Shape::Irregular: {
            const double th = std::atan2(y, x);
            const double k = 1.0 + 0.2 * std::sin(3 * th + g.phase);
            return (x * x + y * y) / (k * k);
        }
    }
    return x * x + y * y;
}

/// Fixed colormap from normalized depth in [0, 1] to RGB.
inline std::array<float, 3> depth_color(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return {static_cast<float>(0.1 + 0.85 * v), static_cast<float>(0.15 + 0.7 * v * v), static_cast<float>(0.45 + 0.45 * v - 0.4 * v * v)};
}

inline TactileFrame render_frame(Shape shape, const ObjectGeometry& g, double depth_m, int index, const SynthConfig& cfg, std::mt19937_64& rng) {
    require(g.radius_m <= cfg.fov_half_m, ErrorKind::DegenerateGeometry, "object radius exceeds the sensor field of view");
    TactileFrame f;
    f.height = f.width = cfg.image_size;
    f.timestamp_index = index;
    f.pixels.resize(static_cast<std::size_t>(cfg.image_size) * cfg.image_size * 3);
    const double px = 2 * cfg.fov_half_m / cfg.image_size;
    for (int yi = 0; yi < cfg.image_size; ++yi)
        for (int xi = 0; xi < cfg.image_size; ++xi) {
            const double x = (xi + 0.5) * px - cfg.fov_half_m, y = (yi + 0.5) * px - cfg.fov_half_m;
            const double z = std::max(0.0, depth_m - shape_r2(shape, x, y, g) / (2 * g.radius_m));
            const auto rgb = depth_color(z / cfg.max_indentation_m);
            for (int c = 0; c < 3; ++c) {
                double v = rgb[c];
                if (cfg.pixel_noise > 0) v += cfg.pixel_noise * standard_normal(rng);
                f.at(yi, xi, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    return f;
}

/// One grasp: the gripper closes from first contact until the Hertz force
/// reaches 60 N or the indentation reaches its cap, whichever comes first.
inline GraspRecord synth_grasp(const ObjectMeta& meta, const ContactParams& params, const SynthConfig& cfg, std::mt19937_64& rng,
                               const std::string& grasp_id) {
    params.validate();
    const auto geo = object_geometry(meta, cfg);
    ContactParams body = params;
    body.effective_radius_m = geo.radius_m;
    const double d_final = std::min(hertz_depth(meta.young_modulus_pa, kForceThresholdN, body), cfg.max_indentation_m);
    const double w0 = uniform(rng, cfg.width0_min_m, cfg.width0_max_m);
    double force_sigma = cfg.force_noise_n;
    if (cfg.stiff_saturation && meta.young_modulus_pa > params.sensor_modulus_pa) force_sigma = std::hypot(force_sigma, cfg.plateau_noise_n);

    GraspRecord g;
    g.grasp_id = grasp_id;
    g.object_id = meta.object_id;
    const int n = cfg.samples;
    std::vector<double> depth(n);
    for (int i = 0; i < n; ++i) {
        depth[i] = d_final * i / (n - 1);
        double f = hertz_force(meta.young_modulus_pa, depth[i], body);
        if (force_sigma > 0 && i > 0) f += force_sigma * standard_normal(rng);
        g.force_n.push_back(std::clamp(f, 0.0, kForceLimitN));
        double w = w0 - 2 * depth[i];
        if (cfg.width_noise_m > 0 && i > 0) w += cfg.width_noise_m * standard_normal(rng);
        g.width_m.push_back(w);
    }
    const auto idx = frame_sample_indices(static_cast<std::size_t>(n));
    for (int t = 0; t < 3; ++t) g.frames[t] = render_frame(meta.shape, geo, depth[idx[t]], t, cfg, rng);
    if (cfg.estimates) g.estimates = estimate(g, params);
    return g;
}

inline Catalog synth_catalog(const SynthConfig& cfg, const ContactParams& params = {}) {
    cfg.validate();
    Catalog c;
    for (int i = 0; i < cfg.num_objects; ++i) {
        std::mt19937_64 rng(derive_seed(cfg.seed, "object", i));
        auto m = synth_object(cfg, rng, i);
        for (int k = 0; k < cfg.grasps_per_object; ++k) {
            const std::string gid = m.object_id + "-g" + std::to_string(k);
            std::mt19937_64 grng(derive_seed(cfg.seed, "grasp", gid));
            c.grasps.push_back(synth_grasp(m, params, cfg, grng, gid));
        }
        c.objects.emplace(m.object_id, std::move(m));
    }
    return c;
}

/// Writes the catalog in the canonical layout plus synth-manifest.json.
inline void write_synth_dataset(const io::fs::path& root, const SynthConfig& cfg, const ContactParams& params, const Catalog& c) {
    write_catalog(root, c);
    nlohmann::ordered_json j;
    j["generator"] = "tactile synth";
    j["config"] = synth_config_json(cfg);
    j["contact"] = {{"sensor_modulus_pa", params.sensor_modulus_pa},
                    {"poisson_object", params.poisson_object},
                    {"poisson_sensor", params.poisson_sensor},
                    {"effective_radius_m", params.effective_radius_m}};
    j["objects"] = c.objects.size();
    j["grasps"] = c.grasps.size();
    io::write_text(root / "synth-manifest.json", j.dump(2) + "\n");
}

}  // namespace tactile
