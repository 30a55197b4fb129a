#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "metric_fixtures.hpp"
#include "tactile/metrics.hpp"

namespace tactile {
namespace {

TEST(Metrics, Fixtures) {
    const auto& cases = testing::metric_cases();
    ASSERT_GE(cases.size(), 20u);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        EXPECT_NEAR(log10_accuracy(c.preds_pa, c.truths_pa), c.log10_accuracy, 1e-9) << i;
        EXPECT_NEAR(n_mse(c.preds_pa, c.truths_pa), c.n_mse, 1e-9) << i;
        if (c.r_squared) {
            EXPECT_NEAR(r_squared_pa(c.preds_pa, c.truths_pa), *c.r_squared, 1e-9) << i;
        }
    }
}

TEST(Log10Accuracy, Boundary) {
    EXPECT_EQ(log10_accuracy({1e7}, {1e6}), 1.0);
    EXPECT_EQ(log10_accuracy({1.1e7}, {1e6}), 0.0);
    EXPECT_EQ(log10_accuracy({1e6, 2e6}, {1e6, 2e6}), 1.0);
}

TEST(Log10Accuracy, Errors) {
    EXPECT_THROW(log10_accuracy({1, 2}, {1}), Error);
    try {
        log10_accuracy({0.0}, {1.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonPositiveValue);
    }
}

TEST(Log10Accuracy, PowerOfTenScalingInvariant) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(4, 10), noise(-1.5, 1.5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p, t;
        for (int i = 0; i < 20; ++i) {
            const double lt = u(rng);
            t.push_back(std::pow(10.0, lt));
            p.push_back(std::pow(10.0, lt + noise(rng)));
        }
        const double base = log10_accuracy(p, t);
        for (int k : {-1, 1, 2}) {
            auto ps = p, ts = t;
            for (auto& x : ps) x *= std::pow(10.0, k);
            for (auto& x : ts) x *= std::pow(10.0, k);
            EXPECT_EQ(log10_accuracy(ps, ts), base);
        }
    }
}

TEST(NMse, HandValues) {
    EXPECT_EQ(n_mse({1e6, 1e7}, {1e6, 1e7}), 0.0);
    EXPECT_DOUBLE_EQ(n_mse({1e12}, {1e3}), 1.0);
    EXPECT_NEAR(n_mse({1e5, 1e8}, {1e6, 1e6}), (1.0 / 81 + 4.0 / 81) / 2, 1e-12);
}

TEST(NMse, SymmetricInPairs) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(3, 12);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p, t;
        for (int i = 0; i < 10; ++i) {
            p.push_back(std::pow(10.0, u(rng)));
            t.push_back(std::pow(10.0, u(rng)));
        }
        EXPECT_DOUBLE_EQ(n_mse(p, t), n_mse(t, p));
        EXPECT_GE(n_mse(p, t), 0.0);
    }
}

TEST(RSquared, HandValues) {
    EXPECT_DOUBLE_EQ(r_squared({0, 0.5, 1}, {0, 0.5, 1}), 1.0);
    EXPECT_DOUBLE_EQ(r_squared({0.5, 0.5, 0.5}, {0, 0.5, 1}), 0.0);
    EXPECT_NEAR(r_squared({0.1, 0.5, 0.9}, {0, 0.5, 1}), 0.96, 1e-12);
    try {
        r_squared({0.1, 0.2}, {0.3, 0.3});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConstantTruths);
    }
}

TEST(MeanStd, SampleConvention) {
    auto one = mean_std({0.8});
    EXPECT_EQ(one.mean, 0.8);
    EXPECT_EQ(one.std, 0.0);
    auto two = mean_std({0.8, 0.9});
    EXPECT_NEAR(two.mean, 0.85, 1e-15);
    EXPECT_NEAR(two.std, 0.07071067811865477, 1e-12);
}

}  // namespace
}  // namespace tactile
