#pragma once

// Per-grasp prediction tables and the analyses built on them: rolling decade
// windows, material/shape breakdowns and the log-log scatter plot.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tactile/contact.hpp"
#include "tactile/io.hpp"
#include "tactile/metrics.hpp"
#include "tactile/pipeline.hpp"

namespace tactile {

struct PredictionRow {
    std::string grasp_id;
    double truth_pa = 0;
    double pred_pa = 0;
    std::string material;
    std::string shape;
    double se = 0;  // squared error on normalized values

    bool operator==(const PredictionRow&) const = default;
};

struct Aggregates {
    double log10_accuracy = 0;
    double n_mse = 0;
    std::optional<double> r_squared;  // absent when truths are constant or there is one row
};

inline std::vector<double> truths_of(const std::vector<PredictionRow>& rows) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.truth_pa);
    return v;
}

inline std::vector<double> preds_of(const std::vector<PredictionRow>& rows) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.pred_pa);
    return v;
}

inline Aggregates aggregates(const std::vector<PredictionRow>& rows, const ModulusBounds& b = {}) {
    Aggregates a;
    const auto p = preds_of(rows), t = truths_of(rows);
    a.log10_accuracy = log10_accuracy(p, t);
    a.n_mse = n_mse(p, t, b);
    try {
        a.r_squared = r_squared_pa(p, t, b);
    } catch (const Error&) {
        a.r_squared.reset();
    }
    return a;
}

// ---------------------------------------------------------------------------
// predictions.csv

inline const std::vector<std::string> kPredictionHeader{"grasp_id", "truth_pa", "pred_pa", "material", "shape", "se"};

inline std::string predictions_csv(const std::vector<PredictionRow>& rows) {
    std::string out = io::csv_line(kPredictionHeader);
    for (const auto& r : rows)
        out += io::csv_line({r.grasp_id, io::fmt_double(r.truth_pa), io::fmt_double(r.pred_pa), r.material, r.shape, io::fmt_double(r.se)});
    return out;
}

inline std::vector<PredictionRow> read_predictions(const io::fs::path& path) {
    const auto t = io::read_csv(path);
    require(t.header == kPredictionHeader, ErrorKind::MalformedRow, path.string() + ": header must be grasp_id,truth_pa,pred_pa,material,shape,se");
    std::vector<PredictionRow> rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& f = t.rows[i];
        PredictionRow r;
        const std::string where = path.string() + " row " + std::to_string(i + 2);
        require(f.size() == 6, ErrorKind::MalformedRow, where + ": expected 6 fields");
        r.grasp_id = f[0];
        r.material = f[3];
        r.shape = f[4];
        require(io::parse_double(f[1], r.truth_pa) && io::parse_double(f[2], r.pred_pa) && io::parse_double(f[5], r.se), ErrorKind::MalformedRow,
                where + ": non-numeric value");
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Rolling windows

struct WindowResult {
    int lo_decade = 0;  // window is [10^lo, 10^hi)
    int hi_decade = 0;
    std::size_t available = 0;
    std::size_t used = 0;
    bool empty = true;
    double n_mse = 0;  // normalized with the window's own decade span
};

/// Windows [10^(3+k), 10^(3+k+span)) for k < windows. Nonempty windows are
/// undersampled (seeded) to the smallest nonempty count; empty ones are flagged.
inline std::vector<WindowResult> rolling_window_report(const std::vector<PredictionRow>& rows, int windows = 7, int span_decades = 3,
                                                       std::uint64_t seed = 0, int first_decade = 3) {
    require(windows >= 1 && span_decades >= 1, ErrorKind::InvalidArgument, "windows and span must be >= 1");
    std::vector<WindowResult> out;
    std::vector<std::vector<std::size_t>> members;
    for (int k = 0; k < windows; ++k) {
        WindowResult w;
        w.lo_decade = first_decade + k;
        w.hi_decade = w.lo_decade + span_decades;
        std::vector<std::size_t> m;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double l = std::log10(rows[i].truth_pa);
            if (l >= w.lo_decade && l < w.hi_decade) m.push_back(i);
        }
        // stable order independent of the input row order
        std::sort(m.begin(), m.end(), [&](std::size_t a, std::size_t b) { return rows[a].grasp_id < rows[b].grasp_id; });
        w.available = m.size();
        w.empty = m.empty();
        out.push_back(w);
        members.push_back(std::move(m));
    }
    std::size_t target = 0;
    for (const auto& w : out)
        if (!w.empty) target = target ? std::min(target, w.available) : w.available;
    for (int k = 0; k < windows; ++k) {
        auto& w = out[k];
        if (w.empty) continue;
        auto m = members[k];
        std::mt19937_64 rng(derive_seed(seed, "window", k));
        shuffle(m, rng);
        m.resize(target);
        const ModulusBounds b{static_cast<double>(w.lo_decade), static_cast<double>(w.hi_decade)};
        std::vector<double> p, t;
        for (std::size_t i : m) {
            p.push_back(rows[i].pred_pa);
            t.push_back(rows[i].truth_pa);
        }
        w.used = target;
        w.n_mse = n_mse(p, t, b);
    }
    return out;
}

inline std::string windows_csv(const std::vector<WindowResult>& ws) {
    std::string out = io::csv_line({"lo_pa", "hi_pa", "available", "used", "empty", "n_mse"});
    for (const auto& w : ws)
        out += io::csv_line({io::fmt_double(std::pow(10.0, w.lo_decade)), io::fmt_double(std::pow(10.0, w.hi_decade)), std::to_string(w.available),
                             std::to_string(w.used), w.empty ? "1" : "0", w.empty ? "" : io::fmt_double(w.n_mse)});
    return out;
}

// ---------------------------------------------------------------------------
// Breakdown by material or shape

enum class BreakdownKey { Material, Shape };

inline BreakdownKey parse_breakdown_key(const std::string& s) {
    if (s == "material") return BreakdownKey::Material;
    if (s == "shape") return BreakdownKey::Shape;
    fail(ErrorKind::UnknownKey, "breakdown key must be material or shape, got '" + s + "'");
}

inline std::string to_string(BreakdownKey k) { return k == BreakdownKey::Material ? "material" : "shape"; }

struct GroupMetrics {
    std::string group;
    std::size_t count = 0;
    double log10_accuracy = 0;
    double n_mse = 0;
};

struct ScatterRow {
    std::string grasp_id;
    double truth_pa = 0;
    double pred_pa = 0;
    std::string group;
    double se = 0;
    bool inside_band = false;  // se <= overall mean squared error
};

struct Breakdown {
    BreakdownKey key = BreakdownKey::Material;
    double overall_n_mse = 0;
    std::vector<GroupMetrics> groups;  // sorted by group name
    std::vector<ScatterRow> scatter;
};

inline const std::string& group_of(const PredictionRow& r, BreakdownKey k) { return k == BreakdownKey::Material ? r.material : r.shape; }

inline Breakdown breakdown_report(const std::vector<PredictionRow>& rows, BreakdownKey key, const ModulusBounds& b = {}) {
    require(!rows.empty(), ErrorKind::LengthMismatch, "no rows to break down");
    Breakdown out;
    out.key = key;
    std::map<std::string, std::vector<PredictionRow>> groups;
    for (const auto& r : rows) {
        require(!group_of(r, key).empty(), ErrorKind::UnknownKey, "row " + r.grasp_id + " has no " + to_string(key));
        groups[group_of(r, key)].push_back(r);
    }
    out.overall_n_mse = n_mse(preds_of(rows), truths_of(rows), b);
    for (const auto& [name, members] : groups) {
        const auto a = aggregates(members, b);
        out.groups.push_back({name, members.size(), a.log10_accuracy, a.n_mse});
    }
    for (const auto& r : rows) {
        const double se = squared_error_norm(r.pred_pa, r.truth_pa, b);
        out.scatter.push_back({r.grasp_id, r.truth_pa, r.pred_pa, group_of(r, key), se, se <= out.overall_n_mse});
    }
    return out;
}

/// One table: a summary row per group (row_type=group), then one row per grasp
/// (row_type=point) with the band flag and the sensor modulus reference.
inline std::string breakdown_csv(const Breakdown& bd, double sensor_modulus_pa = ContactParams{}.sensor_modulus_pa) {
    std::string out = io::csv_line({"row_type", "group", "count", "log10_accuracy", "n_mse", "grasp_id", "truth_pa", "pred_pa", "se", "inside_band",
                                    "sensor_modulus_pa"});
    const std::string sensor = io::fmt_double(sensor_modulus_pa);
    for (const auto& g : bd.groups)
        out += io::csv_line({"group", g.group, std::to_string(g.count), io::fmt_double(g.log10_accuracy), io::fmt_double(g.n_mse), "", "", "", "", "", sensor});
    for (const auto& s : bd.scatter)
        out += io::csv_line({"point", s.group, "", "", "", s.grasp_id, io::fmt_double(s.truth_pa), io::fmt_double(s.pred_pa), io::fmt_double(s.se),
                             s.inside_band ? "1" : "0", sensor});
    return out;
}

// ---------------------------------------------------------------------------
// Scatter SVG

/// Log-log scatter of predictions against truth with the identity line, a
/// vertical line at the sensor modulus and a shaded band where the normalized
/// residual is at most sqrt(N-MSE).
inline std::string scatter_svg(const std::vector<PredictionRow>& rows, const ModulusBounds& b = {},
                               double sensor_modulus_pa = ContactParams{}.sensor_modulus_pa, const std::string& title = "") {
    constexpr double size = 480, margin = 56, plot = size - 2 * margin;
    const double lo = b.log10_min, hi = b.log10_max;
    auto sx = [&](double l) { return margin + (std::clamp(l, lo, hi) - lo) / (hi - lo) * plot; };
    auto sy = [&](double l) { return margin + plot - (std::clamp(l, lo, hi) - lo) / (hi - lo) * plot; };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    const double nmse = rows.empty() ? 0.0 : n_mse(preds_of(rows), truths_of(rows), b);
    const double off = std::sqrt(nmse) * (hi - lo);

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
    s << "<defs><clipPath id=\"plot\"><rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot << "\" height=\"" << plot
      << "\"/></clipPath></defs>\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty()) s << "<text x=\"" << size / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    // band drawn in unclamped plot coordinates, clipped to the plot area
    auto ux = [&](double l) { return margin + (l - lo) / (hi - lo) * plot; };
    auto uy = [&](double l) { return margin + plot - (l - lo) / (hi - lo) * plot; };
    s << "<polygon class=\"band\" clip-path=\"url(#plot)\" fill=\"#9ecae1\" fill-opacity=\"0.4\" points=\"" << num(ux(lo)) << "," << num(uy(lo - off))
      << " " << num(ux(hi)) << "," << num(uy(hi - off)) << " " << num(ux(hi)) << "," << num(uy(hi + off)) << " " << num(ux(lo)) << ","
      << num(uy(lo + off)) << "\"/>\n";
    s << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot << "\" height=\"" << plot << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int d = static_cast<int>(std::ceil(lo)); d <= static_cast<int>(std::floor(hi)); ++d) {
        s << "<text x=\"" << num(sx(d)) << "\" y=\"" << num(margin + plot + 18) << "\" text-anchor=\"middle\" font-size=\"11\">1e" << d << "</text>\n";
        s << "<text x=\"" << num(margin - 6) << "\" y=\"" << num(sy(d) + 4) << "\" text-anchor=\"end\" font-size=\"11\">1e" << d << "</text>\n";
    }
    s << "<text x=\"" << size / 2 << "\" y=\"" << size - 10 << "\" text-anchor=\"middle\" font-size=\"12\">true modulus (Pa)</text>\n";
    s << "<text x=\"14\" y=\"" << size / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " << size / 2
      << ")\">predicted modulus (Pa)</text>\n";
    s << "<line class=\"diagonal\" x1=\"" << num(sx(lo)) << "\" y1=\"" << num(sy(lo)) << "\" x2=\"" << num(sx(hi)) << "\" y2=\"" << num(sy(hi))
      << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
    const double ls = std::log10(sensor_modulus_pa);
    s << "<line class=\"sensor\" x1=\"" << num(sx(ls)) << "\" y1=\"" << margin << "\" x2=\"" << num(sx(ls)) << "\" y2=\"" << margin + plot
      << "\" stroke=\"#d62728\"/>\n";
    for (const auto& r : rows)
        s << "<circle cx=\"" << num(sx(std::log10(r.truth_pa))) << "\" cy=\"" << num(sy(std::log10(r.pred_pa)))
          << "\" r=\"2.5\" fill=\"#1f77b4\" fill-opacity=\"0.7\"/>\n";
    s << "</svg>\n";
    return s.str();
}

}  // namespace tactile
