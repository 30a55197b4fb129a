#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "tactile/pipeline.hpp"
#include "test_util.hpp"

namespace tactile {
namespace {

using testing::flat_frame;
using testing::object;
using testing::simple_grasp;

/// `per_object[i]` grasps for object i, with modulus 10^(3.5 + decade[i]).
Catalog catalog_with(const std::vector<int>& per_object, const std::vector<int>& decade) {
    Catalog c;
    int gid = 0;
    for (std::size_t o = 0; o < per_object.size(); ++o) {
        const std::string oid = "o" + std::to_string(o);
        c.objects[oid] = object(oid, std::pow(10.0, 3.5 + decade[o]));
        for (int k = 0; k < per_object[o]; ++k) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "g%05d", gid++);
            c.grasps.push_back(simple_grasp(buf, oid, 3));
        }
    }
    return c;
}

Catalog uniform_catalog(int objects, int grasps_each) {
    std::vector<int> per(objects, grasps_each), dec(objects);
    for (int i = 0; i < objects; ++i) dec[i] = i % 9;
    return catalog_with(per, dec);
}

TEST(Split, SeenProportions) {
    const auto c = uniform_catalog(20, 5);  // 100 grasps
    const auto s = split(c, SplitMode::SeenObject, 1);
    EXPECT_EQ(s.test.size(), 20u);
    EXPECT_EQ(s.validation.size(), 16u);
    EXPECT_EQ(s.train.size(), 64u);
    EXPECT_EQ(check_split(s, c), "");
}

TEST(Split, SizesFloor) {
    EXPECT_EQ(split_sizes(100), (std::array<std::size_t, 3>{64, 16, 20}));
    EXPECT_EQ(split_sizes(7), (std::array<std::size_t, 3>{5, 1, 1}));
    EXPECT_EQ(split_sizes(4), (std::array<std::size_t, 3>{4, 0, 0}));
    for (std::size_t n = 0; n < 500; ++n) {
        const auto s = split_sizes(n);
        EXPECT_EQ(s[0] + s[1] + s[2], n);
        EXPECT_EQ(s[2], n / 5);
    }
}

TEST(Split, Deterministic) {
    const auto c = uniform_catalog(15, 4);
    EXPECT_EQ(split(c, SplitMode::SeenObject, 9), split(c, SplitMode::SeenObject, 9));
    EXPECT_EQ(split(c, SplitMode::UnseenObject, 9), split(c, SplitMode::UnseenObject, 9));
    EXPECT_NE(split(c, SplitMode::SeenObject, 9), split(c, SplitMode::SeenObject, 10));
}

TEST(Split, UnseenNoObjectOverlap) {
    const auto c = catalog_with({2, 3, 4, 5, 6, 2, 3, 4, 5, 6, 7, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 0, 1, 2, 3});
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = split(c, SplitMode::UnseenObject, seed);
        ASSERT_EQ(check_split(s, c), "") << seed;
        std::set<std::string> train_obj, held_obj;
        for (const auto& g : c.grasps) {
            if (std::binary_search(s.train.begin(), s.train.end(), g.grasp_id)) train_obj.insert(g.object_id);
            if (std::binary_search(s.test.begin(), s.test.end(), g.grasp_id) ||
                std::binary_search(s.validation.begin(), s.validation.end(), g.grasp_id))
                held_obj.insert(g.object_id);
        }
        for (const auto& o : held_obj) ASSERT_FALSE(train_obj.count(o));
        EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), c.grasps.size());
    }
}

TEST(Split, UnseenObjectLevelProportions) {
    const auto c = uniform_catalog(25, 3);
    const auto s = split(c, SplitMode::UnseenObject, 4);
    // 25 objects -> 5 test, 4 validation, 16 train objects
    EXPECT_EQ(s.test.size(), 15u);
    EXPECT_EQ(s.validation.size(), 12u);
    EXPECT_EQ(s.train.size(), 48u);
}

TEST(Split, TooFewObjects) {
    const auto c = uniform_catalog(4, 3);
    try {
        split(c, SplitMode::UnseenObject, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TooFewObjects);
    }
    EXPECT_NO_THROW(split(c, SplitMode::SeenObject, 1));
}

TEST(Split, JsonRoundTrip) {
    const auto c = uniform_catalog(10, 3);
    for (auto mode : {SplitMode::SeenObject, SplitMode::UnseenObject}) {
        const auto s = split(c, mode, 3);
        EXPECT_EQ(split_from_json(split_to_json(s)), s);
    }
    EXPECT_THROW(split_from_json("{\"mode\":\"seen\"}"), Error);
}

TEST(Balance, TwoBucketRule) {
    // 10 grasps in decade 0, 5 in decade 4
    const auto c = catalog_with({10, 5}, {0, 4});
    std::vector<std::string> ids;
    for (const auto& g : c.grasps) ids.push_back(g.grasp_id);
    BalanceConfig cfg;
    cfg.t_balance = 10;
    const auto out = balance(ids, c, cfg, 7);
    const auto h = bucket_histogram(out, c);
    EXPECT_EQ(h[0], 10u);
    EXPECT_EQ(h[4], 10u);
    EXPECT_EQ(out.size(), 20u);
    EXPECT_EQ(std::set<std::string>(out.begin(), out.end()), std::set<std::string>(ids.begin(), ids.end()));
}

TEST(Balance, AlreadyBalancedIsPermutation) {
    const auto c = catalog_with({6, 7}, {1, 2});
    std::vector<std::string> ids;
    for (const auto& g : c.grasps) ids.push_back(g.grasp_id);
    BalanceConfig cfg;
    cfg.t_balance = 5;
    auto out = balance(ids, c, cfg, 1);
    std::sort(out.begin(), out.end());
    EXPECT_EQ(out, ids);
}

TEST(Balance, SkewedCatalogThreshold) {
    const auto c = catalog_with({300, 40, 7, 1, 90, 2}, {0, 1, 2, 5, 6, 8});
    std::vector<std::string> ids;
    for (const auto& g : c.grasps) ids.push_back(g.grasp_id);
    BalanceConfig cfg;
    cfg.t_balance = 500;
    const auto out = balance(ids, c, cfg, 3);
    // independent histogram from object moduli
    std::map<std::string, int> decade_of;
    for (const auto& g : c.grasps) decade_of[g.grasp_id] = static_cast<int>(std::floor(std::log10(c.objects.at(g.object_id).young_modulus_pa))) - 3;
    std::array<int, 9> h{};
    for (const auto& id : out) ++h[decade_of[id]];
    for (int b = 0; b < 9; ++b) {
        const bool nonempty = b == 0 || b == 1 || b == 2 || b == 5 || b == 6 || b == 8;
        if (nonempty)
            EXPECT_GE(h[b], 500) << b;
        else
            EXPECT_EQ(h[b], 0) << b;
    }
    EXPECT_EQ(std::set<std::string>(out.begin(), out.end()), std::set<std::string>(ids.begin(), ids.end()));
    EXPECT_EQ(out, balance(ids, c, cfg, 3));
}

TEST(Balance, BucketEdges) {
    EXPECT_EQ(bucket_of(1e3), 0);
    EXPECT_EQ(bucket_of(9.99e3), 0);
    EXPECT_EQ(bucket_of(1e4), 1);
    EXPECT_EQ(bucket_of(5e11), 8);
    EXPECT_EQ(bucket_of(1e12), 8);
    EXPECT_EQ(bucket_of(10), 0);
}

TactileFrame random_frame(int h, int w, int index, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    TactileFrame f = flat_frame(h, 0, index);
    f.width = w;
    f.pixels.resize(static_cast<std::size_t>(h) * w * 3);
    for (auto& p : f.pixels) p = static_cast<float>(uniform01(rng));
    return f;
}

TEST(Augment, IdentityConfig) {
    const auto f = random_frame(8, 6, 1, 2);
    EXPECT_EQ(augment(f, AugmentConfig::none(), 123), f);
}

TEST(Augment, ForcedFlipBothAxes) {
    const auto f = random_frame(5, 7, 0, 3);
    auto cfg = AugmentConfig::none();
    cfg.flip_prob = 1.0;
    const auto g = augment(f, cfg, 9);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x)
            for (int c = 0; c < 3; ++c) ASSERT_EQ(g.at(y, x, c), f.at(4 - y, 6 - x, c));
}

TEST(Augment, NoiseStatistics) {
    const auto f = flat_frame(64, 0.5f, 0);
    auto cfg = AugmentConfig::none();
    cfg.gaussian_sigma = 0.05;
    const auto g = augment(f, cfg, 17);
    double sum = 0, sq = 0;
    for (float p : g.pixels) sum += p;
    const double mean = sum / static_cast<double>(g.pixels.size());
    for (float p : g.pixels) sq += (p - mean) * (p - mean);
    const double sd = std::sqrt(sq / static_cast<double>(g.pixels.size() - 1));
    EXPECT_NEAR(mean, 0.5, 0.01);
    EXPECT_NEAR(sd, 0.05, 0.2 * 0.05);
}

TEST(Augment, SharedFlipAcrossFrames) {
    auto cfg = AugmentConfig::none();
    cfg.flip_prob = 0.5;
    int flipped = 0;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        std::array<TactileFrame, 3> frames{random_frame(4, 4, 0, 1), random_frame(4, 4, 1, 2), random_frame(4, 4, 2, 3)};
        const auto out = augment_grasp(frames, cfg, seed);
        std::array<bool, 3> h{};
        for (int i = 0; i < 3; ++i) h[i] = out[i].at(0, 0, 0) == frames[i].at(0, 3, 0) && out[i] != frames[i];
        EXPECT_EQ(h[0], h[1]);
        EXPECT_EQ(h[1], h[2]);
        flipped += h[0];
    }
    EXPECT_GT(flipped, 0);
    EXPECT_LT(flipped, 64);
}

TEST(Augment, OutputInUnitRangeAndDeterministic) {
    AugmentConfig cfg;  // defaults, all components on
    cfg.gaussian_sigma = 0.3;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto f = random_frame(6, 6, static_cast<int>(seed % 3), seed);
        const auto g = augment(f, cfg, seed);
        for (float p : g.pixels) ASSERT_TRUE(p >= 0.0f && p <= 1.0f);
        EXPECT_EQ(g, augment(f, cfg, seed));
    }
}

TEST(Augment, HueRoundTripIsIdentity) {
    for (float r : {0.0f, 0.2f, 0.9f})
        for (float g : {0.1f, 0.5f, 1.0f})
            for (float b : {0.0f, 0.7f}) {
                float h, s, v, r2, g2, b2;
                detail::rgb_to_hsv(r, g, b, h, s, v);
                detail::hsv_to_rgb(h, s, v, r2, g2, b2);
                EXPECT_NEAR(r2, r, 1e-6);
                EXPECT_NEAR(g2, g, 1e-6);
                EXPECT_NEAR(b2, b, 1e-6);
            }
}

TEST(Augment, InvalidConfig) {
    AugmentConfig cfg;
    cfg.hue = 0.6;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.flip_prob = 1.5;
    EXPECT_THROW(cfg.validate(), Error);
}

TEST(Resize, BlockMeans) {
    const auto f = random_frame(8, 8, 2, 5);
    const auto r = resize_box(f, 4);
    EXPECT_EQ(r.timestamp_index, 2);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) {
                const float m = (f.at(2 * y, 2 * x, c) + f.at(2 * y + 1, 2 * x, c) + f.at(2 * y, 2 * x + 1, c) + f.at(2 * y + 1, 2 * x + 1, c)) / 4;
                EXPECT_NEAR(r.at(y, x, c), m, 1e-6);
            }
}

TEST(Resize, PreservesConstantAndMean) {
    const auto f = flat_frame(10, 0.3f, 0);
    for (int s : {3, 4, 7, 10, 13})
        for (float p : resize_box(f, s).pixels) EXPECT_NEAR(p, 0.3f, 1e-6);
}

TEST(Rng, UniformIndexInRangeAndSeedsDiffer) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) EXPECT_LT(uniform_index(rng, 7), 7u);
    EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
    EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
    EXPECT_EQ(derive_seed(5, "x", 3), derive_seed(5, "x", 3));
}

}  // namespace
}  // namespace tactile
