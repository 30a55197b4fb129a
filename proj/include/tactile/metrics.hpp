#pragma once

#include <cmath>
#include <vector>

#include "tactile/contact.hpp"

namespace tactile {

namespace detail {

inline void check_pairs(const std::vector<double>& preds, const std::vector<double>& truths, bool positive) {
    require(preds.size() == truths.size(), ErrorKind::LengthMismatch,
            std::to_string(preds.size()) + " predictions vs " + std::to_string(truths.size()) + " truths");
    require(!preds.empty(), ErrorKind::LengthMismatch, "no items to score");
    if (!positive) return;
    for (std::size_t i = 0; i < preds.size(); ++i)
        require(preds[i] > 0 && truths[i] > 0 && std::isfinite(preds[i]) && std::isfinite(truths[i]), ErrorKind::NonPositiveValue,
                "item " + std::to_string(i) + " has a non-positive or non-finite modulus");
}

}  // namespace detail

/// |log10(truth) - log10(pred)| <= 1 counts as correct.
inline bool within_decade(double pred_pa, double truth_pa) {
    // log10 of an exact power-of-ten ratio is exact, so the boundary is not lost to rounding
    return std::abs(std::log10(truth_pa) - std::log10(pred_pa)) <= 1.0;
}

inline double log10_accuracy(const std::vector<double>& preds_pa, const std::vector<double>& truths_pa) {
    detail::check_pairs(preds_pa, truths_pa, true);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds_pa.size(); ++i) hits += within_decade(preds_pa[i], truths_pa[i]);
    return static_cast<double>(hits) / static_cast<double>(preds_pa.size());
}

inline double squared_error_norm(double pred_pa, double truth_pa, const ModulusBounds& b) {
    const double d = normalize_young(pred_pa, b) - normalize_young(truth_pa, b);
    return d * d;
}

inline double n_mse(const std::vector<double>& preds_pa, const std::vector<double>& truths_pa, const ModulusBounds& b = {}) {
    detail::check_pairs(preds_pa, truths_pa, true);
    double s = 0;
    for (std::size_t i = 0; i < preds_pa.size(); ++i) s += squared_error_norm(preds_pa[i], truths_pa[i], b);
    return s / static_cast<double>(preds_pa.size());
}

/// 1 - SS_res / SS_tot on normalized values.
inline double r_squared(const std::vector<double>& preds_norm, const std::vector<double>& truths_norm) {
    detail::check_pairs(preds_norm, truths_norm, false);
    require(truths_norm.size() >= 2, ErrorKind::LengthMismatch, "r_squared needs at least 2 items");
    double mean = 0;
    for (double t : truths_norm) mean += t;
    mean /= static_cast<double>(truths_norm.size());
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < truths_norm.size(); ++i) {
        ss_res += (truths_norm[i] - preds_norm[i]) * (truths_norm[i] - preds_norm[i]);
        ss_tot += (truths_norm[i] - mean) * (truths_norm[i] - mean);
    }
    require(ss_tot > 0, ErrorKind::ConstantTruths, "truths are constant");
    return 1.0 - ss_res / ss_tot;
}

inline double r_squared_pa(const std::vector<double>& preds_pa, const std::vector<double>& truths_pa, const ModulusBounds& b = {}) {
    detail::check_pairs(preds_pa, truths_pa, true);
    std::vector<double> p, t;
    for (std::size_t i = 0; i < preds_pa.size(); ++i) {
        p.push_back(normalize_young(preds_pa[i], b));
        t.push_back(normalize_young(truths_pa[i], b));
    }
    return r_squared(p, t);
}

struct MeanStd {
    double mean = 0;
    double std = 0;
};

/// Sample (n - 1) standard deviation; zero for a single value.
inline MeanStd mean_std(const std::vector<double>& v) {
    require(!v.empty(), ErrorKind::LengthMismatch, "mean_std of nothing");
    MeanStd out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    if (v.size() < 2) return out;
    double ss = 0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return out;
}

}  // namespace tactile
