#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "tactile/reports.hpp"
#include "test_util.hpp"

namespace tactile {
namespace {

PredictionRow row(const std::string& id, double truth, double pred, const std::string& mat = "rubber", const std::string& shape = "sphere") {
    return {id, truth, pred, mat, shape, squared_error_norm(pred, truth, {})};
}

/// Truths log-uniform over [1e3, 1e12), predictions off by a fixed log error with random sign.
std::vector<PredictionRow> uniform_error_rows(int n, double log_err, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<PredictionRow> rows;
    for (int i = 0; i < n; ++i) {
        const double l = 3 + 9 * uniform01(rng);
        const double sign = uniform01(rng) < 0.5 ? -1 : 1;
        rows.push_back(row("g" + std::to_string(i), std::pow(10.0, l), std::pow(10.0, l + sign * log_err)));
    }
    return rows;
}

TEST(Predictions, CsvRoundTrip) {
    testing::TempDir dir("pred");
    std::vector<PredictionRow> rows{row("a", 1e5, 2e5), row("b,quoted", 3.3e9, 1.25e8, "metal", "hex")};
    io::write_text(dir.path() / "p.csv", predictions_csv(rows));
    EXPECT_EQ(read_predictions(dir.path() / "p.csv"), rows);
    io::write_text(dir.path() / "bad.csv", "grasp_id,truth\n");
    EXPECT_THROW(read_predictions(dir.path() / "bad.csv"), Error);
}

TEST(Aggregates, MatchMetricFunctions) {
    const auto rows = uniform_error_rows(50, 0.7, 1);
    const auto a = aggregates(rows);
    EXPECT_EQ(a.log10_accuracy, 1.0);
    double s = 0;
    for (const auto& r : rows) s += r.se;
    EXPECT_NEAR(a.n_mse, s / rows.size(), 1e-12);
    ASSERT_TRUE(a.r_squared.has_value());
    EXPECT_FALSE(aggregates({row("x", 1e5, 1e6)}).r_squared.has_value());
}

TEST(RollingWindows, SevenEqualSizedWindows) {
    const auto rows = uniform_error_rows(2000, 0.5, 2);
    const auto ws = rolling_window_report(rows);
    ASSERT_EQ(ws.size(), 7u);
    std::size_t smallest = ws[0].available;
    for (const auto& w : ws) {
        EXPECT_FALSE(w.empty);
        smallest = std::min(smallest, w.available);
    }
    for (int k = 0; k < 7; ++k) {
        EXPECT_EQ(ws[k].lo_decade, 3 + k);
        EXPECT_EQ(ws[k].hi_decade, 6 + k);
        EXPECT_EQ(ws[k].used, smallest);
    }
}

TEST(RollingWindows, UniformErrorIsFlat) {
    const auto ws = rolling_window_report(uniform_error_rows(3000, 0.6, 3));
    double lo = 1e9, hi = 0;
    for (const auto& w : ws) {
        lo = std::min(lo, w.n_mse);
        hi = std::max(hi, w.n_mse);
        // a constant log error e inside a window of span 3 gives (e / 3)^2 unless clamped at the edges
        EXPECT_LE(w.n_mse, 0.04 + 1e-12);
    }
    EXPECT_LE(hi, 2 * lo);
}

TEST(RollingWindows, EmptyWindowsFlaggedAndSkipped) {
    std::vector<PredictionRow> rows;
    for (int i = 0; i < 40; ++i) rows.push_back(row("g" + std::to_string(i), std::pow(10.0, 4 + 5 * (i + 0.5) / 40), 1e6));
    const auto ws = rolling_window_report(rows);
    ASSERT_EQ(ws.size(), 7u);
    EXPECT_TRUE(ws[6].empty);  // [1e9, 1e12)
    EXPECT_FALSE(ws[5].empty);
    EXPECT_EQ(ws[6].used, 0u);
    for (const auto& w : ws)
        if (!w.empty) {
            EXPECT_EQ(w.used, ws[5].available);
        }
    const auto csv = windows_csv(ws);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
}

TEST(RollingWindows, Deterministic) {
    const auto rows = uniform_error_rows(500, 0.3, 9);
    auto shuffled = rows;
    std::mt19937_64 rng(1);
    shuffle(shuffled, rng);
    const auto a = rolling_window_report(rows, 7, 3, 4), b = rolling_window_report(shuffled, 7, 3, 4);
    for (int k = 0; k < 7; ++k) EXPECT_EQ(a[k].n_mse, b[k].n_mse);
}

TEST(Breakdown, SingleGroupEqualsOverall) {
    const auto rows = uniform_error_rows(30, 1.2, 4);
    const auto bd = breakdown_report(rows, BreakdownKey::Material);
    ASSERT_EQ(bd.groups.size(), 1u);
    const auto a = aggregates(rows);
    EXPECT_EQ(bd.groups[0].n_mse, a.n_mse);
    EXPECT_EQ(bd.groups[0].log10_accuracy, a.log10_accuracy);
    EXPECT_EQ(bd.groups[0].count, rows.size());
}

TEST(Breakdown, BandBoundaryIsInclusive) {
    // errors of exactly 0.9 and 2.7 decades on bounds 3..12: SE 0.01 and 0.09, MSE 0.05
    std::vector<PredictionRow> rows{row("a", 1e6, std::pow(10.0, 6.9)), row("b", 1e6, std::pow(10.0, 8.7))};
    auto bd = breakdown_report(rows, BreakdownKey::Shape);
    EXPECT_TRUE(bd.scatter[0].inside_band);
    EXPECT_FALSE(bd.scatter[1].inside_band);
    // a single row has SE == MSE
    bd = breakdown_report({rows[1]}, BreakdownKey::Shape);
    EXPECT_TRUE(bd.scatter[0].inside_band);
    EXPECT_EQ(bd.scatter[0].se, bd.overall_n_mse);
}

TEST(Breakdown, SoftGroupsOrderedByError) {
    std::vector<PredictionRow> rows;
    const std::vector<std::pair<std::string, double>> groups{{"foam", 0.1}, {"rubber", 0.3}, {"plastic", 0.8}, {"metal", 1.5}};
    for (const auto& [g, err] : groups)
        for (int i = 0; i < 10; ++i) rows.push_back(row(g + std::to_string(i), 1e7, std::pow(10.0, 7 + (i % 2 ? err : -err)), g));
    const auto bd = breakdown_report(rows, BreakdownKey::Material);
    std::map<std::string, double> nm;
    for (const auto& g : bd.groups) nm[g.group] = g.n_mse;
    EXPECT_LT(nm["foam"], nm["rubber"]);
    EXPECT_LT(nm["rubber"], nm["plastic"]);
    EXPECT_LT(nm["plastic"], nm["metal"]);
    const auto csv = breakdown_csv(bd);
    EXPECT_NE(csv.find("sensor_modulus_pa"), std::string::npos);
    EXPECT_NE(csv.find("275000"), std::string::npos);
}

TEST(Breakdown, UnknownKey) {
    EXPECT_THROW(parse_breakdown_key("colour"), Error);
    try {
        breakdown_report({row("a", 1e5, 1e5, "")}, BreakdownKey::Material);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnknownKey);
    }
}

TEST(Scatter, SvgHasPlotElements) {
    const auto svg = scatter_svg(uniform_error_rows(20, 0.5, 5), {}, 0.275e6, "test");
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("class=\"diagonal\""), std::string::npos);
    EXPECT_NE(svg.find("class=\"sensor\""), std::string::npos);
    EXPECT_NE(svg.find("class=\"band\""), std::string::npos);
    std::size_t circles = 0;
    for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
    EXPECT_EQ(circles, 20u);
}

}  // namespace
}  // namespace tactile
