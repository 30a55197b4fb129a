#pragma once

// Adapter from the upstream ("native") dataset layout to the canonical one.
//
// Native layout:
//   <raw>/objects.csv   object_id,name,shape,material plus exactly one of
//                       young_modulus_pa | shore_a | shore_00
//   <raw>/<object_id>/<grasp_name>/
//       *.png           tactile frames; file-name order is time order; when more
//                       than three are present the first, middle and last are kept
//       trajectory.csv  force_n and width_m (or width_mm) columns, any order
//       estimates.csv   optional, e_elastic_pa,e_hertz_pa
//
// grasp_id is "<object_id>-<grasp_name>". Per-row and per-grasp problems are
// logged and skipped; only a missing objects.csv stops the run.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "tactile/contact.hpp"
#include "tactile/dataset.hpp"

namespace tactile {

struct IngestReport {
    std::size_t objects = 0;
    std::size_t grasps = 0;
    std::vector<std::string> failures;  // one line per skipped row or grasp
};

namespace detail {

inline std::vector<ObjectMeta> ingest_objects(const io::fs::path& path, IngestReport& rep) {
    require(io::fs::exists(path), ErrorKind::MissingFile, "native metadata " + path.string() + " not found");
    const auto t = io::read_csv(path);
    const int id = t.column("object_id"), name = t.column("name"), shape = t.column("shape"), material = t.column("material");
    const int young = t.column("young_modulus_pa"), sa = t.column("shore_a"), s00 = t.column("shore_00");
    require(id >= 0 && name >= 0 && shape >= 0 && material >= 0, ErrorKind::MalformedRow,
            path.string() + ": needs object_id, name, shape and material columns");
    require((young >= 0) + (sa >= 0) + (s00 >= 0) == 1, ErrorKind::MalformedRow,
            path.string() + ": needs exactly one of young_modulus_pa, shore_a, shore_00");
    std::vector<ObjectMeta> out;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = "objects.csv row " + std::to_string(r + 2) + ": ";
        try {
            require(row.size() == t.header.size(), ErrorKind::MalformedRow, where + "field count differs from header");
            ObjectMeta m;
            m.object_id = row[id];
            m.name = row[name];
            const auto sh = parse_shape(row[shape]);
            const auto mat = parse_material(row[material]);
            require(sh.has_value(), ErrorKind::MalformedRow, where + "unknown shape '" + row[shape] + "'");
            require(mat.has_value(), ErrorKind::MalformedRow, where + "unknown material '" + row[material] + "'");
            m.shape = *sh;
            m.material = *mat;
            const int col = young >= 0 ? young : sa >= 0 ? sa : s00;
            double v = 0;
            require(io::parse_double(row[col], v), ErrorKind::MalformedRow, where + "hardness/modulus is not a number");
            if (young >= 0) m.young_modulus_pa = v;
            else if (sa >= 0) m.young_modulus_pa = gent_shoreA_to_young(v);
            else m.young_modulus_pa = gent_shoreA_to_young(shore00_to_shoreA(v));
            const auto why = check_object(m);
            require(why.empty(), ErrorKind::MalformedRow, where + why);
            require(seen.insert(m.object_id).second, ErrorKind::DuplicateObjectId, where + "duplicate object_id " + m.object_id);
            out.push_back(std::move(m));
        } catch (const Error& e) {
            rep.failures.push_back(e.what());
        }
    }
    return out;
}

inline GraspRecord ingest_grasp(const io::fs::path& dir, const std::string& grasp_id, const std::string& object_id) {
    GraspRecord g;
    g.grasp_id = grasp_id;
    g.object_id = object_id;
    std::vector<io::fs::path> pngs;
    for (const auto& e : io::fs::directory_iterator(dir))
        if (e.is_regular_file() && lowercase(e.path().extension().string()) == ".png") pngs.push_back(e.path());
    std::sort(pngs.begin(), pngs.end());
    require(pngs.size() >= 3, ErrorKind::MissingFrameFile, "grasp " + grasp_id + ": " + std::to_string(pngs.size()) + " frame files, need 3");
    const auto idx = frame_sample_indices(pngs.size());
    for (int i = 0; i < 3; ++i) g.frames[i] = frame_from_rgb(io::read_png(pngs[idx[i]]), i);

    const auto traj_path = dir / "trajectory.csv";
    require(io::fs::exists(traj_path), ErrorKind::MissingFile, "grasp " + grasp_id + ": missing trajectory.csv");
    const auto t = io::read_csv(traj_path);
    const int f = t.column("force_n"), wm = t.column("width_m"), wmm = t.column("width_mm");
    require(f >= 0 && (wm >= 0) != (wmm >= 0), ErrorKind::MalformedRow, "grasp " + grasp_id + ": trajectory needs force_n and one of width_m, width_mm");
    const int w = wm >= 0 ? wm : wmm;
    const double scale = wm >= 0 ? 1.0 : 1e-3;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        double fv = 0, wv = 0;
        const bool has_f = static_cast<int>(row.size()) > f && !row[f].empty();
        const bool has_w = static_cast<int>(row.size()) > w && !row[w].empty();
        if (has_f) {
            require(io::parse_double(row[f], fv), ErrorKind::MalformedRow, "grasp " + grasp_id + ": bad force value");
            g.force_n.push_back(fv);
        }
        if (has_w) {
            require(io::parse_double(row[w], wv), ErrorKind::MalformedRow, "grasp " + grasp_id + ": bad width value");
            g.width_m.push_back(wv * scale);
        }
    }
    require(g.force_n.size() == g.width_m.size(), ErrorKind::TrajectoryLengthMismatch,
            "grasp " + grasp_id + ": " + std::to_string(g.force_n.size()) + " force samples vs " + std::to_string(g.width_m.size()) + " width samples");

    const auto est_path = dir / "estimates.csv";
    if (io::fs::exists(est_path)) {
        const auto e = io::read_csv(est_path);
        const int el = e.column("e_elastic_pa"), he = e.column("e_hertz_pa");
        require(el >= 0 && he >= 0 && e.rows.size() == 1, ErrorKind::MalformedRow, "grasp " + grasp_id + ": estimates.csv needs one e_elastic_pa,e_hertz_pa row");
        AnalyticalEstimate a;
        require(io::parse_double(e.rows[0].at(el), a.e_elastic_pa) && io::parse_double(e.rows[0].at(he), a.e_hertz_pa), ErrorKind::MalformedRow,
                "grasp " + grasp_id + ": estimates are not numbers");
        g.estimates = a;
    }
    const auto why = check_grasp(g);
    require(why.empty(), ErrorKind::MalformedRow, "grasp " + grasp_id + ": " + why);
    return g;
}

}  // namespace detail

/// Reads the native layout into a catalog (uncleaned). Failures land in `rep`.
inline Catalog ingest_native(const io::fs::path& raw, IngestReport& rep) {
    Catalog c;
    for (auto& m : detail::ingest_objects(raw / "objects.csv", rep)) c.objects.emplace(m.object_id, std::move(m));
    for (const auto& [oid, meta] : c.objects) {
        const auto odir = raw / oid;
        if (!io::fs::is_directory(odir)) {
            rep.failures.push_back("object " + oid + ": no grasp directory");
            continue;
        }
        std::vector<io::fs::path> gdirs;
        for (const auto& e : io::fs::directory_iterator(odir))
            if (e.is_directory()) gdirs.push_back(e.path());
        std::sort(gdirs.begin(), gdirs.end());
        for (const auto& gd : gdirs) {
            const std::string gid = oid + "-" + gd.filename().string();
            try {
                c.grasps.push_back(detail::ingest_grasp(gd, gid, oid));
            } catch (const Error& e) {
                rep.failures.push_back(e.what());
            } catch (const std::exception& e) {
                rep.failures.push_back("grasp " + gid + ": " + e.what());
            }
        }
    }
    for (const auto& e : io::fs::directory_iterator(raw))
        if (e.is_directory() && !c.objects.count(e.path().filename().string()))
            rep.failures.push_back("directory " + e.path().filename().string() + ": no matching object in objects.csv");
    std::sort(c.grasps.begin(), c.grasps.end(), [](const GraspRecord& a, const GraspRecord& b) { return a.grasp_id < b.grasp_id; });
    std::sort(rep.failures.begin(), rep.failures.end());
    rep.objects = c.objects.size();
    rep.grasps = c.grasps.size();
    return c;
}

}  // namespace tactile
