#pragma once

// Hardness conversions, analytical modulus estimators from (force, width)
// trajectories, and the log10 target normalization.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "tactile/dataset.hpp"

namespace tactile {

struct ContactParams {
    double sensor_modulus_pa = 0.275e6;
    double poisson_object = 0.45;
    double poisson_sensor = 0.45;
    double effective_radius_m = 0.01;

    void validate() const {
        auto ok_nu = [](double v) { return std::isfinite(v) && v > 0 && v <= 0.5; };
        require(std::isfinite(sensor_modulus_pa) && sensor_modulus_pa > 0, ErrorKind::InvalidArgument, "sensor_modulus_pa must be positive");
        require(ok_nu(poisson_object) && ok_nu(poisson_sensor), ErrorKind::InvalidArgument, "poisson ratios must lie in (0, 0.5]");
        require(std::isfinite(effective_radius_m) && effective_radius_m > 0, ErrorKind::InvalidArgument, "effective_radius_m must be positive");
    }
};

struct ModulusBounds {
    double log10_min = 3.0;
    double log10_max = 12.0;

    void validate() const {
        require(std::isfinite(log10_min) && std::isfinite(log10_max) && log10_min < log10_max, ErrorKind::InvalidArgument,
                "modulus bounds need log10_min < log10_max");
    }
    double lo_pa() const { return std::pow(10.0, log10_min); }
    double hi_pa() const { return std::pow(10.0, log10_max); }
};

// ---------------------------------------------------------------------------
// Hardness

/// Gent's relation between Shore A hardness S and Young's modulus in pascals.
inline double gent_shoreA_to_young(double shore_a) {
    require(std::isfinite(shore_a) && shore_a >= 0 && shore_a < 100, ErrorKind::OutOfRangeHardness,
            "Shore A " + io::fmt_double(shore_a) + " outside [0, 100)");
    return 1e6 * (0.0981 * (56.0 + 7.62336 * shore_a)) / (0.137505 * (254.0 - 2.54 * shore_a));
}

/// Shore 00 -> Shore A correspondence, read from the common durometer
/// comparison chart (Shore 00 on the left). Both columns are nondecreasing.
inline constexpr std::array<std::pair<double, double>, 12> kShore00ToA{{
    {0, 0}, {40, 0}, {50, 5}, {60, 10}, {70, 20}, {80, 30},
    {85, 40}, {90, 50}, {93, 60}, {95, 70}, {97, 80}, {100, 90},
}};

inline double shore00_to_shoreA(double shore_00) {
    require(std::isfinite(shore_00) && shore_00 >= 0 && shore_00 <= 100, ErrorKind::OutOfRangeHardness,
            "Shore 00 " + io::fmt_double(shore_00) + " outside [0, 100]");
    for (std::size_t i = 1; i < kShore00ToA.size(); ++i) {
        const auto [x0, y0] = kShore00ToA[i - 1];
        const auto [x1, y1] = kShore00ToA[i];
        if (shore_00 <= x1) {
            if (shore_00 == x1) return y1;
            return y0 + (y1 - y0) * (shore_00 - x0) / (x1 - x0);
        }
    }
    return kShore00ToA.back().second;
}

// ---------------------------------------------------------------------------
// Contact mechanics

/// 1/E* = (1 - nu_o^2)/E_o + (1 - nu_s^2)/E_s
inline double effective_modulus(double object_pa, const ContactParams& p) {
    return 1.0 / ((1 - p.poisson_object * p.poisson_object) / object_pa + (1 - p.poisson_sensor * p.poisson_sensor) / p.sensor_modulus_pa);
}

/// Hertz force for a sphere of radius R pressed to depth d.
inline double hertz_force(double object_pa, double depth_m, const ContactParams& p) {
    if (depth_m <= 0) return 0.0;
    return 4.0 / 3.0 * effective_modulus(object_pa, p) * std::sqrt(p.effective_radius_m) * std::pow(depth_m, 1.5);
}

/// Depth at which the Hertz force reaches `force_n`.
inline double hertz_depth(double object_pa, double force_n, const ContactParams& p) {
    if (force_n <= 0) return 0.0;
    const double c = 4.0 / 3.0 * effective_modulus(object_pa, p) * std::sqrt(p.effective_radius_m);
    return std::pow(force_n / c, 2.0 / 3.0);
}

/// d_i = max(0, (W_0 - W_i) / 2): each of the two fingers indents by half the closure.
inline std::vector<double> indentation(const std::vector<double>& width_m) {
    std::vector<double> d;
    d.reserve(width_m.size());
    for (double w : width_m) d.push_back(width_m.empty() ? 0.0 : std::max(0.0, (width_m.front() - w) / 2));
    return d;
}

struct ModulusFit {
    double pascals = 0.0;
    bool clamped = false;
    bool non_physical = false;  // effective modulus stiffer than the sensor allows
};

inline ModulusFit clamp_modulus(double e, const ModulusBounds& b) {
    ModulusFit f{e, false, false};
    if (!(e >= b.lo_pa())) {  // also catches NaN
        f.pascals = b.lo_pa();
        f.clamped = true;
    } else if (e > b.hi_pa()) {
        f.pascals = b.hi_pa();
        f.clamped = true;
    }
    return f;
}

namespace detail {

inline void check_trajectory(const std::vector<double>& force_n, const std::vector<double>& width_m, const std::vector<double>& d) {
    require(force_n.size() == width_m.size(), ErrorKind::TrajectoryLengthMismatch, "force and width trajectories differ in length");
    const auto positive = std::count_if(d.begin(), d.end(), [](double x) { return x > 0; });
    require(positive >= 2, ErrorKind::InsufficientIndentation,
            "need at least 2 samples with positive indentation, got " + std::to_string(positive));
}

}  // namespace detail

/// Least-squares Hertz fit F = 4/3 E* sqrt(R) d^1.5 over samples with d > 0,
/// then inversion of the effective modulus for the object modulus.
inline ModulusFit hertz_fit_detail(const std::vector<double>& force_n, const std::vector<double>& width_m, const ContactParams& p,
                                   const ModulusBounds& b = {}) {
    p.validate();
    const auto d = indentation(width_m);
    detail::check_trajectory(force_n, width_m, d);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] <= 0) continue;
        num += force_n[i] * std::pow(d[i], 1.5);
        den += d[i] * d[i] * d[i];
    }
    const double e_star = 0.75 * num / (std::sqrt(p.effective_radius_m) * den);
    const double inv_obj = 1.0 / e_star - (1 - p.poisson_sensor * p.poisson_sensor) / p.sensor_modulus_pa;
    if (!(e_star > 0)) return clamp_modulus(0.0, b);
    if (inv_obj <= 0) return {b.hi_pa(), true, true};
    return clamp_modulus((1 - p.poisson_object * p.poisson_object) / inv_obj, b);
}

inline ModulusFit hertz_fit_detail(const GraspRecord& g, const ContactParams& p, const ModulusBounds& b = {}) {
    return hertz_fit_detail(g.force_n, g.width_m, p, b);
}

inline double hertz_fit(const GraspRecord& g, const ContactParams& p, const ModulusBounds& b = {}) {
    return hertz_fit_detail(g, p, b).pascals;
}

/// Stiffness k of F = k d through the origin (all samples).
inline double elastic_stiffness(const std::vector<double>& force_n, const std::vector<double>& d) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        num += force_n[i] * d[i];
        den += d[i] * d[i];
    }
    return num / den;
}

/// Hooke estimate E = k L / A with L = 2R and A = pi R^2.
inline ModulusFit elastic_fit_detail(const std::vector<double>& force_n, const std::vector<double>& width_m, const ContactParams& p,
                                     const ModulusBounds& b = {}) {
    p.validate();
    const auto d = indentation(width_m);
    detail::check_trajectory(force_n, width_m, d);
    const double k = elastic_stiffness(force_n, d);
    const double r = p.effective_radius_m;
    return clamp_modulus(k * 2 * r / (std::numbers::pi * r * r), b);
}

inline double elastic_fit(const GraspRecord& g, const ContactParams& p, const ModulusBounds& b = {}) {
    return elastic_fit_detail(g.force_n, g.width_m, p, b).pascals;
}

inline AnalyticalEstimate estimate(const GraspRecord& g, const ContactParams& p, const ModulusBounds& b = {}) {
    return {elastic_fit(g, p, b), hertz_fit(g, p, b)};
}

// ---------------------------------------------------------------------------
// Target normalization

inline double normalize_young(double y_pa, const ModulusBounds& b = {}) {
    require(std::isfinite(y_pa) && y_pa > 0, ErrorKind::NonPositiveModulus, "modulus must be positive, got " + io::fmt_double(y_pa));
    const double t = (std::log10(y_pa) - b.log10_min) / (b.log10_max - b.log10_min);
    return std::clamp(t, 0.0, 1.0);
}

inline double denormalize_young(double t, const ModulusBounds& b = {}) {
    return std::pow(10.0, b.log10_min + t * (b.log10_max - b.log10_min));
}

}  // namespace tactile
