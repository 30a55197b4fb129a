#pragma once

// Canonical data types and the on-disk dataset layout:
//
//   <root>/metadata.csv                  object_id,name,shape,material,young_modulus_pa
//   <root>/grasps.csv                    grasp_id,object_id
//   <root>/grasps/<grasp_id>/frames/0.png 1.png 2.png
//   <root>/grasps/<grasp_id>/trajectory.csv     force_n,width_m
//   <root>/grasps/<grasp_id>/estimates.csv      e_elastic_pa,e_hertz_pa   (optional)

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tactile/io.hpp"

namespace tactile {

enum class Shape { Sphere, Cylinder, Rectangular, Hex, Irregular };
enum class Material { Foam, Rubber, Food, Plastic, Wood, Glass, Ceramic, Metal };

inline constexpr std::array<Shape, 5> kShapes{Shape::Sphere, Shape::Cylinder, Shape::Rectangular, Shape::Hex, Shape::Irregular};
inline constexpr std::array<Material, 8> kMaterials{Material::Foam,  Material::Rubber, Material::Food,    Material::Plastic,
                                                    Material::Wood,  Material::Glass,  Material::Ceramic, Material::Metal};

inline std::string to_string(Shape s) {
    switch (s) {
        case Shape::Sphere: return "sphere";
        case Shape::Cylinder: return "cylinder";
        case Shape::Rectangular: return "rectangular";
        case Shape::Hex: return "hex";
        case Shape::Irregular: return "irregular";
    }
    return "?";
}

inline std::string to_string(Material m) {
    switch (m) {
        case Material::Foam: return "foam";
        case Material::Rubber: return "rubber";
        case Material::Food: return "food";
        case Material::Plastic: return "plastic";
        case Material::Wood: return "wood";
        case Material::Glass: return "glass";
        case Material::Ceramic: return "ceramic";
        case Material::Metal: return "metal";
    }
    return "?";
}

inline std::string lowercase(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::optional<Shape> parse_shape(const std::string& s) {
    const auto l = lowercase(s);
    for (auto v : kShapes)
        if (to_string(v) == l) return v;
    if (l == "hexagon" || l == "hexagonal") return Shape::Hex;
    if (l == "rect" || l == "box" || l == "cuboid") return Shape::Rectangular;
    return std::nullopt;
}

inline std::optional<Material> parse_material(const std::string& s) {
    const auto l = lowercase(s);
    for (auto v : kMaterials)
        if (to_string(v) == l) return v;
    return std::nullopt;
}

struct ObjectMeta {
    std::string object_id;
    std::string name;
    Shape shape = Shape::Sphere;
    Material material = Material::Foam;
    double young_modulus_pa = 0.0;

    bool operator==(const ObjectMeta&) const = default;
};

inline constexpr double kMinModulusPa = 1e3;
inline constexpr double kMaxModulusPa = 1e12;

/// Empty string when valid, otherwise the reason.
inline std::string check_object(const ObjectMeta& m) {
    if (m.object_id.empty()) return "empty object_id";
    if (!std::isfinite(m.young_modulus_pa) || m.young_modulus_pa <= 0) return "young_modulus_pa must be positive";
    if (m.young_modulus_pa < kMinModulusPa || m.young_modulus_pa > kMaxModulusPa)
        return "young_modulus_pa " + io::fmt_double(m.young_modulus_pa) + " outside [1e3, 1e12]";
    return {};
}

/// H x W x 3 image with channel values in [0, 1], interleaved RGB, row-major.
struct TactileFrame {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;
    int timestamp_index = 0;

    float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    bool operator==(const TactileFrame&) const = default;
};

struct AnalyticalEstimate {
    double e_elastic_pa = 0.0;
    double e_hertz_pa = 0.0;

    bool operator==(const AnalyticalEstimate&) const = default;
};

struct GraspRecord {
    std::string grasp_id;
    std::string object_id;
    std::array<TactileFrame, 3> frames;
    std::vector<double> force_n;
    std::vector<double> width_m;
    std::optional<AnalyticalEstimate> estimates;

    bool operator==(const GraspRecord&) const = default;
};

/// Trajectory indices matched to the three frames: first, middle, last.
inline std::array<std::size_t, 3> frame_sample_indices(std::size_t samples) {
    return {0, (samples - 1) / 2, samples - 1};
}

// Acceptance limits for recorded trajectories.
inline constexpr double kForceThresholdN = 60.0;
inline constexpr double kForceLimitN = 66.0;        // threshold plus 10% overshoot
inline constexpr double kWidthJitterM = 1e-4;       // allowed increase between samples
inline constexpr double kMinChange = 1e-6;          // below this max-min a signal counts as constant

/// Empty string when valid, otherwise the reason. Trajectory length mismatches
/// are reported separately by the loader.
inline std::string check_grasp(const GraspRecord& g) {
    if (g.force_n.size() != g.width_m.size()) return "force/width length mismatch";
    if (g.force_n.size() < 2) return "trajectory needs at least 2 samples";
    const int h = g.frames[0].height, w = g.frames[0].width;
    for (int i = 0; i < 3; ++i) {
        const auto& f = g.frames[i];
        if (f.timestamp_index != i) return "frame " + std::to_string(i) + " has timestamp_index " + std::to_string(f.timestamp_index);
        if (f.height != h || f.width != w || f.height <= 0 || f.width <= 0) return "frame sizes differ";
        if (f.pixels.size() != static_cast<std::size_t>(h) * w * 3) return "frame payload size mismatch";
        for (float p : f.pixels)
            if (!(p >= 0.0f && p <= 1.0f)) return "pixel value outside [0,1]";
    }
    for (double f : g.force_n)
        if (!std::isfinite(f) || f < 0) return "negative or non-finite force";
    if (*std::max_element(g.force_n.begin(), g.force_n.end()) > kForceLimitN) return "force exceeds 66 N";
    for (std::size_t i = 0; i < g.width_m.size(); ++i) {
        if (!std::isfinite(g.width_m[i]) || g.width_m[i] <= 0) return "width must be positive";
        if (i && g.width_m[i] - g.width_m[i - 1] > kWidthJitterM) return "width increases by more than 1e-4 m";
    }
    if (g.estimates) {
        const auto& e = *g.estimates;
        if (!(std::isfinite(e.e_elastic_pa) && e.e_elastic_pa > 0 && std::isfinite(e.e_hertz_pa) && e.e_hertz_pa > 0))
            return "estimates must be positive and finite";
    }
    return {};
}

struct Catalog {
    std::map<std::string, ObjectMeta> objects;
    std::vector<GraspRecord> grasps;

    const ObjectMeta& object_of(const GraspRecord& g) const {
        auto it = objects.find(g.object_id);
        require(it != objects.end(), ErrorKind::UnknownObjectId, "grasp " + g.grasp_id + " references unknown object " + g.object_id);
        return it->second;
    }

    const GraspRecord& grasp(const std::string& grasp_id) const {
        auto it = std::lower_bound(grasps.begin(), grasps.end(), grasp_id,
                                   [](const GraspRecord& g, const std::string& id) { return g.grasp_id < id; });
        if (it != grasps.end() && it->grasp_id == grasp_id) return *it;
        // fall back to a scan for catalogs not sorted by id
        for (const auto& g : grasps)
            if (g.grasp_id == grasp_id) return g;
        fail(ErrorKind::UnknownKey, "unknown grasp_id " + grasp_id);
    }

    bool operator==(const Catalog&) const = default;
};

// ---------------------------------------------------------------------------
// Loading

inline std::vector<ObjectMeta> load_metadata(const io::fs::path& path) {
    require(io::fs::exists(path), ErrorKind::MissingFile, "metadata file " + path.string() + " not found");
    const auto table = io::read_csv(path);
    const std::vector<std::string> expected{"object_id", "name", "shape", "material", "young_modulus_pa"};
    require(table.header == expected, ErrorKind::MalformedRow, "row 0: header must be object_id,name,shape,material,young_modulus_pa");
    std::vector<ObjectMeta> out;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = "row " + std::to_string(r + 1) + ": ";
        require(row.size() == expected.size(), ErrorKind::MalformedRow, where + "expected 5 fields, got " + std::to_string(row.size()));
        ObjectMeta m;
        m.object_id = row[0];
        m.name = row[1];
        auto shape = parse_shape(row[2]);
        auto material = parse_material(row[3]);
        require(shape.has_value(), ErrorKind::MalformedRow, where + "unknown shape '" + row[2] + "'");
        require(material.has_value(), ErrorKind::MalformedRow, where + "unknown material '" + row[3] + "'");
        m.shape = *shape;
        m.material = *material;
        require(io::parse_double(row[4], m.young_modulus_pa), ErrorKind::MalformedRow, where + "young_modulus_pa is not a number");
        const auto why = check_object(m);
        require(why.empty(), ErrorKind::MalformedRow, where + why);
        require(seen.insert(m.object_id).second, ErrorKind::DuplicateObjectId, "duplicate object_id " + m.object_id);
        out.push_back(std::move(m));
    }
    return out;
}

inline TactileFrame frame_from_rgb(const io::RgbImage& img, int index) {
    TactileFrame f;
    f.height = img.height;
    f.width = img.width;
    f.timestamp_index = index;
    f.pixels.resize(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) f.pixels[i] = static_cast<float>(img.pixels[i]) / 255.0f;
    return f;
}

inline io::RgbImage rgb_from_frame(const TactileFrame& f) {
    io::RgbImage img;
    img.width = f.width;
    img.height = f.height;
    img.pixels.resize(f.pixels.size());
    for (std::size_t i = 0; i < f.pixels.size(); ++i)
        img.pixels[i] = static_cast<unsigned char>(std::lround(std::clamp(f.pixels[i], 0.0f, 1.0f) * 255.0f));
    return img;
}

/// Reads one grasp directory. Throws MissingFrameFile, TrajectoryLengthMismatch or MalformedRow.
inline GraspRecord load_grasp_dir(const io::fs::path& dir, const std::string& grasp_id, const std::string& object_id) {
    GraspRecord g;
    g.grasp_id = grasp_id;
    g.object_id = object_id;
    for (int i = 0; i < 3; ++i) {
        const auto p = dir / "frames" / (std::to_string(i) + ".png");
        require(io::fs::exists(p), ErrorKind::MissingFrameFile, "grasp " + grasp_id + ": missing frames/" + std::to_string(i) + ".png");
        g.frames[i] = frame_from_rgb(io::read_png(p), i);
    }
    const auto traj_path = dir / "trajectory.csv";
    require(io::fs::exists(traj_path), ErrorKind::MissingFile, "grasp " + grasp_id + ": missing trajectory.csv");
    const auto traj = io::read_csv(traj_path);
    require(traj.header == std::vector<std::string>{"force_n", "width_m"}, ErrorKind::MalformedRow,
            "grasp " + grasp_id + ": trajectory header must be force_n,width_m");
    for (std::size_t r = 0; r < traj.rows.size(); ++r) {
        const auto& row = traj.rows[r];
        require(!row.empty() && row.size() <= 2, ErrorKind::MalformedRow, "grasp " + grasp_id + ": bad trajectory row " + std::to_string(r + 1));
        double v = 0;
        if (!row[0].empty()) {
            require(io::parse_double(row[0], v), ErrorKind::MalformedRow, "grasp " + grasp_id + ": bad force value");
            g.force_n.push_back(v);
        }
        if (row.size() == 2 && !row[1].empty()) {
            require(io::parse_double(row[1], v), ErrorKind::MalformedRow, "grasp " + grasp_id + ": bad width value");
            g.width_m.push_back(v);
        }
    }
    require(g.force_n.size() == g.width_m.size(), ErrorKind::TrajectoryLengthMismatch,
            "grasp " + grasp_id + ": " + std::to_string(g.force_n.size()) + " force samples vs " + std::to_string(g.width_m.size()) + " width samples");
    const auto est_path = dir / "estimates.csv";
    if (io::fs::exists(est_path)) {
        const auto est = io::read_csv(est_path);
        require(est.header == std::vector<std::string>{"e_elastic_pa", "e_hertz_pa"} && est.rows.size() == 1 && est.rows[0].size() == 2,
                ErrorKind::MalformedRow, "grasp " + grasp_id + ": estimates.csv must hold one e_elastic_pa,e_hertz_pa row");
        AnalyticalEstimate e;
        require(io::parse_double(est.rows[0][0], e.e_elastic_pa) && io::parse_double(est.rows[0][1], e.e_hertz_pa),
                ErrorKind::MalformedRow, "grasp " + grasp_id + ": estimates are not numbers");
        g.estimates = e;
    }
    const auto why = check_grasp(g);
    require(why.empty(), ErrorKind::MalformedRow, "grasp " + grasp_id + ": " + why);
    return g;
}

struct GraspLoadResult {
    std::vector<GraspRecord> grasps;
    std::size_t rejected_unknown_object = 0;
};

/// Loads every grasp listed in `<root>/grasps.csv`, sorted by grasp_id. Grasps
/// whose object is not in `objects` are skipped and counted, or rejected with
/// UnknownObjectId when `strict`.
inline GraspLoadResult load_grasps(const io::fs::path& root, const std::map<std::string, ObjectMeta>& objects, bool strict = false) {
    const auto index_path = root / "grasps.csv";
    require(io::fs::exists(index_path), ErrorKind::MissingFile, "grasp index " + index_path.string() + " not found");
    const auto index = io::read_csv(index_path);
    require(index.header == std::vector<std::string>{"grasp_id", "object_id"}, ErrorKind::MalformedRow,
            "grasps.csv header must be grasp_id,object_id");
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& row : index.rows) {
        require(row.size() == 2 && !row[0].empty(), ErrorKind::MalformedRow, "grasps.csv: bad row");
        entries.emplace_back(row[0], row[1]);
    }
    std::sort(entries.begin(), entries.end());
    GraspLoadResult out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& [gid, oid] = entries[i];
        require(i == 0 || entries[i - 1].first != gid, ErrorKind::MalformedRow, "duplicate grasp_id " + gid);
        if (!objects.count(oid)) {
            require(!strict, ErrorKind::UnknownObjectId, "grasp " + gid + " references unknown object " + oid);
            ++out.rejected_unknown_object;
            continue;
        }
        out.grasps.push_back(load_grasp_dir(root / "grasps" / gid, gid, oid));
    }
    return out;
}

inline Catalog load_catalog(const io::fs::path& root, std::size_t* rejected = nullptr) {
    Catalog c;
    for (auto& m : load_metadata(root / "metadata.csv")) c.objects.emplace(m.object_id, std::move(m));
    auto res = load_grasps(root, c.objects);
    c.grasps = std::move(res.grasps);
    if (rejected) *rejected = res.rejected_unknown_object;
    return c;
}

// ---------------------------------------------------------------------------
// Writing

inline std::string metadata_csv(const std::vector<ObjectMeta>& objects) {
    std::string out = "object_id,name,shape,material,young_modulus_pa\n";
    for (const auto& m : objects)
        out += io::csv_line({m.object_id, m.name, to_string(m.shape), to_string(m.material), io::fmt_double(m.young_modulus_pa)});
    return out;
}

inline void write_grasp_dir(const io::fs::path& dir, const GraspRecord& g) {
    for (int i = 0; i < 3; ++i) io::write_png(dir / "frames" / (std::to_string(i) + ".png"), rgb_from_frame(g.frames[i]));
    std::string traj = "force_n,width_m\n";
    for (std::size_t i = 0; i < g.force_n.size(); ++i) traj += io::fmt_double(g.force_n[i]) + "," + io::fmt_double(g.width_m[i]) + "\n";
    io::write_text(dir / "trajectory.csv", traj);
    if (g.estimates)
        io::write_text(dir / "estimates.csv",
                       "e_elastic_pa,e_hertz_pa\n" + io::fmt_double(g.estimates->e_elastic_pa) + "," + io::fmt_double(g.estimates->e_hertz_pa) + "\n");
    else
        io::fs::remove(dir / "estimates.csv");
}

inline void write_catalog(const io::fs::path& root, const Catalog& c) {
    io::fs::create_directories(root);
    std::vector<ObjectMeta> objs;
    for (const auto& [id, m] : c.objects) objs.push_back(m);
    io::write_text(root / "metadata.csv", metadata_csv(objs));
    std::string index = "grasp_id,object_id\n";
    for (const auto& g : c.grasps) {
        index += io::csv_line({g.grasp_id, g.object_id});
        write_grasp_dir(root / "grasps" / g.grasp_id, g);
    }
    io::write_text(root / "grasps.csv", index);
}

// ---------------------------------------------------------------------------
// Cleaning

inline bool has_change(const std::vector<double>& v) {
    if (v.empty()) return false;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo >= kMinChange;
}

/// Drops grasps without estimates or with constant force or width, then drops
/// objects left with a single grasp together with that grasp. Relative order of
/// surviving grasps is preserved.
inline Catalog clean(const Catalog& in) {
    Catalog out;
    out.objects = in.objects;
    std::map<std::string, int> counts;
    std::vector<const GraspRecord*> kept;
    for (const auto& g : in.grasps) {
        if (!g.estimates || !has_change(g.force_n) || !has_change(g.width_m)) continue;
        kept.push_back(&g);
        ++counts[g.object_id];
    }
    for (const auto* g : kept)
        if (counts[g->object_id] >= 2) out.grasps.push_back(*g);
    for (const auto& [oid, n] : counts)
        if (n == 1) out.objects.erase(oid);
    require(!out.grasps.empty(), ErrorKind::EmptyAfterCleaning, "no usable grasps remain after cleaning");
    return out;
}

}  // namespace tactile
