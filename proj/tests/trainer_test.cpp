#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "tactile/synth.hpp"
#include "tactile/trainer.hpp"
#include "test_util.hpp"

namespace tactile {
namespace {

ModelConfig tiny_model(Architecture a = Architecture::VggLstm, InputStrategy s = InputStrategy::Image) {
    ModelConfig m;
    m.architecture = a;
    m.strategy = s;
    m.image_size = 8;
    m.encoder_channels = {4, 4};
    m.embed = 8;
    m.lstm_hidden = 8;
    m.tf_dim = 8;
    m.tf_heads = 2;
    m.tf_ffn = 8;
    m.pos_dim = 2;
    m.decoder = {8};
    m.small_decoder = {4};
    return m;
}

SynthConfig small_synth(int objects, double lo, double hi, std::uint64_t seed) {
    SynthConfig c;
    c.num_objects = objects;
    c.grasps_per_object = 3;
    c.image_size = 16;
    c.samples = 8;
    c.log10_min = lo;
    c.log10_max = hi;
    c.pixel_noise = 0.01;
    c.seed = seed;
    return c;
}

RunConfig quick_run(ModelConfig m) {
    RunConfig r;
    r.model = std::move(m);
    r.sampling = Sampling::Random;
    r.augment = AugmentConfig::none();
    r.epochs = 3;
    r.batch_size = 8;
    r.lr = 1e-3;
    r.seeds = {0};
    return r;
}

TEST(RunConfig, Validation) {
    RunConfig r;
    EXPECT_NO_THROW(r.validate());
    EXPECT_EQ(r.seeds.size(), 10u);
    r.epochs = 0;
    EXPECT_THROW(r.validate(), Error);
    r = RunConfig{};
    r.seeds.clear();
    EXPECT_THROW(r.validate(), Error);
    r = RunConfig{};
    r.batch_size = 0;
    EXPECT_THROW(r.validate(), Error);
}

TEST(ModelConfigJson, RoundTrip) {
    auto m = tiny_model(Architecture::ResTf, InputStrategy::All);
    m.loss.l2_lambda = 1e-4;
    m.shared_encoder = false;
    const auto back = model_config_from_json(nlohmann::ordered_json::parse(model_config_json(m).dump()));
    EXPECT_EQ(model_config_json(back), model_config_json(m));
}

TEST(Train, MemorizesOneObject) {
    auto c = small_synth(1, 6, 6, 1);
    c.grasps_per_object = 10;
    const auto one = synth_catalog(c);
    const auto sp = split(one, SplitMode::SeenObject, 0);
    auto run = quick_run(tiny_model());
    run.epochs = 60;
    run.patience = 0;
    const auto tr = train(run, one, sp, 0);
    EXPECT_LT(tr.history.back().train_loss, 1e-3);
    EXPECT_EQ(static_cast<int>(tr.history.size()), 60);
}

TEST(Train, BitIdenticalForEqualSeeds) {
    const auto cat = synth_catalog(small_synth(10, 4, 9, 2));
    const auto sp = split(cat, SplitMode::SeenObject, 3);
    for (auto a : {Architecture::Top10NN, Architecture::VggLstm, Architecture::ResTf}) {
        auto run = quick_run(tiny_model(a));
        run.augment = AugmentConfig{};
        run.sampling = Sampling::Balanced;
        run.balance.t_balance = 12;
        const auto x = train(run, cat, sp, 5), y = train(run, cat, sp, 5), z = train(run, cat, sp, 6);
        ASSERT_EQ(x.params.size(), y.params.size());
        bool differs = false;
        for (std::size_t i = 0; i < x.params.size(); ++i) {
            EXPECT_EQ(x.params[i].value.data, y.params[i].value.data) << x.params[i].name;
            differs |= x.params[i].value.data != z.params[i].value.data;
        }
        EXPECT_TRUE(differs);
        EXPECT_EQ(nn::encode_checkpoint(x.params, "m"), nn::encode_checkpoint(y.params, "m"));
        ASSERT_EQ(x.history.size(), y.history.size());
        for (std::size_t e = 0; e < x.history.size(); ++e) EXPECT_EQ(x.history[e].val_loss, y.history[e].val_loss);
    }
}

TEST(Train, KeepsBestValidationWeights) {
    const auto cat = synth_catalog(small_synth(10, 4, 9, 2));
    const auto sp = split(cat, SplitMode::SeenObject, 3);
    auto run = quick_run(tiny_model());
    run.epochs = 8;
    run.lr = 3e-3;
    run.patience = 0;
    auto tr = train(run, cat, sp, 1);
    double best = 1e300;
    int best_epoch = 0;
    for (const auto& h : tr.history)
        if (h.val_loss < best) {
            best = h.val_loss;
            best_epoch = h.epoch;
        }
    EXPECT_EQ(tr.best_epoch, best_epoch);
    EXPECT_EQ(tr.best_val_loss, best);
    // the returned weights reproduce the best validation loss (augmentation off, random sampling)
    const auto rows = evaluate(run.model, tr.params, cat, sp.validation, run.bounds);
    double mse = 0;
    for (const auto& r : rows) {
        const double p = normalize_young(r.pred_pa), t = normalize_young(r.truth_pa);
        mse += (p - t) * (p - t);
    }
    // evaluation clamps to [0, 1]; the training-time loss does not
    EXPECT_LE(mse / rows.size(), best + 1e-6);
}

TEST(Train, EarlyStoppingHonoursPatience) {
    const auto cat = synth_catalog(small_synth(10, 4, 9, 2));
    const auto sp = split(cat, SplitMode::SeenObject, 3);
    auto run = quick_run(tiny_model());
    run.epochs = 200;
    run.lr = 0.3;  // noisy enough that validation stops improving
    run.patience = 3;
    try {
        const auto tr = train(run, cat, sp, 0);
        EXPECT_LT(tr.history.size(), 200u);
        EXPECT_EQ(static_cast<int>(tr.history.size()), tr.best_epoch + 3);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DivergedTraining);
    }
}

TEST(Train, DivergenceIsReported) {
    const auto cat = synth_catalog(small_synth(10, 4, 9, 2));
    const auto sp = split(cat, SplitMode::SeenObject, 3);
    auto run = quick_run(tiny_model());
    run.lr = 1e30;
    run.epochs = 5;
    try {
        train(run, cat, sp, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DivergedTraining);
    }
}

TEST(Train, AllStrategyNeedsEstimates) {
    auto c = small_synth(10, 4, 9, 2);
    c.estimates = false;
    const auto cat = synth_catalog(c);
    const auto sp = split(cat, SplitMode::SeenObject, 3);
    try {
        train(quick_run(tiny_model(Architecture::Top10NN, InputStrategy::All)), cat, sp, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::StrategyMismatch);
    }
    EXPECT_NO_THROW(train(quick_run(tiny_model(Architecture::Top10NN, InputStrategy::ImageFW)), cat, sp, 0));
}

TEST(Train, BalancedHelpsRareBuckets) {
    // 30 common objects in [1e5, 1e6), 3 rare ones in [1e8, 1e9)
    auto common = synth_catalog(small_synth(30, 5, 5.99, 11));
    auto rare_cfg = small_synth(3, 8, 8.99, 12);
    auto rare = synth_catalog(rare_cfg);
    Catalog cat = common;
    for (auto g : rare.grasps) {
        g.grasp_id = "r" + g.grasp_id;
        g.object_id = "r" + g.object_id;
        cat.grasps.push_back(g);
    }
    for (auto [id, m] : rare.objects) {
        m.object_id = "r" + id;
        cat.objects.emplace(m.object_id, m);
    }
    std::sort(cat.grasps.begin(), cat.grasps.end(), [](const auto& a, const auto& b) { return a.grasp_id < b.grasp_id; });

    double random_loss = 0, balanced_loss = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto sp = split(cat, SplitMode::SeenObject, seed);
        std::vector<std::string> rare_ids;
        for (const auto& id : sp.validation)
            if (id[0] == 'r') rare_ids.push_back(id);
        for (const auto& id : sp.test)
            if (id[0] == 'r') rare_ids.push_back(id);
        ASSERT_FALSE(rare_ids.empty());
        auto run = quick_run(tiny_model());
        run.epochs = 6;
        run.patience = 0;
        run.balance.t_balance = 60;
        auto score = [&](Sampling s) {
            run.sampling = s;
            auto tr = train(run, cat, sp, seed);
            const auto rows = evaluate(run.model, tr.params, cat, rare_ids, run.bounds);
            double se = 0;
            for (const auto& r : rows) se += r.se;
            return se / rows.size();
        };
        random_loss += score(Sampling::Random);
        balanced_loss += score(Sampling::Balanced);
    }
    EXPECT_LT(balanced_loss, random_loss);
}

TEST(Evaluate, RowsUniqueAndAggregatesRecomputable) {
    const auto cat = synth_catalog(small_synth(10, 4, 9, 2));
    const auto sp = split(cat, SplitMode::SeenObject, 3);
    auto run = quick_run(tiny_model());
    auto tr = train(run, cat, sp, 0);
    auto ids = sp.test;
    ids.insert(ids.end(), sp.test.begin(), sp.test.end());
    const auto rows = evaluate(run.model, tr.params, cat, ids, run.bounds);
    ASSERT_EQ(rows.size(), sp.test.size());
    std::set<std::string> seen;
    for (const auto& r : rows) {
        EXPECT_TRUE(seen.insert(r.grasp_id).second);
        EXPECT_GE(r.pred_pa, 1e3 * (1 - 1e-12));
        EXPECT_LE(r.pred_pa, 1e12 * (1 + 1e-12));
        EXPECT_NEAR(r.se, squared_error_norm(r.pred_pa, r.truth_pa, run.bounds), 1e-15);
    }
    const auto a = aggregates(rows);
    double s = 0;
    for (const auto& r : rows) s += r.se;
    EXPECT_NEAR(a.n_mse, s / rows.size(), 1e-9);
}

TEST(Checkpoint, LoadModelReproducesPredictions) {
    testing::TempDir dir("ckpt");
    const auto cat = synth_catalog(small_synth(10, 4, 9, 2));
    const auto sp = split(cat, SplitMode::SeenObject, 3);
    auto run = quick_run(tiny_model(Architecture::ResTf, InputStrategy::All));
    auto tr = train(run, cat, sp, 0);
    nn::save_checkpoint(dir.path() / "m.tkcp", tr.params, checkpoint_meta(run, 0, tr));
    auto lm = load_model(dir.path() / "m.tkcp");
    EXPECT_EQ(model_config_json(lm.config), model_config_json(run.model));
    EXPECT_EQ(evaluate(lm.config, lm.params, cat, sp.test, lm.bounds), evaluate(run.model, tr.params, cat, sp.test, run.bounds));
}

TEST(MultiSeed, SingleSeedHasZeroStd) {
    const auto cat = synth_catalog(small_synth(10, 4, 9, 2));
    const auto sp = split(cat, SplitMode::SeenObject, 3);
    auto run = quick_run(tiny_model());
    const auto rep = multi_seed(run, cat, sp);
    ASSERT_EQ(rep.seeds.size(), 1u);
    EXPECT_EQ(rep.log10_accuracy.std, 0.0);
    EXPECT_EQ(rep.n_mse.std, 0.0);
    EXPECT_EQ(rep.log10_accuracy.mean, rep.seeds[0].metrics.log10_accuracy);
}

TEST(MultiSeed, FailuresListedAndReportSchema) {
    const auto cat = synth_catalog(small_synth(10, 4, 9, 2));
    const auto sp = split(cat, SplitMode::SeenObject, 3);
    auto run = quick_run(tiny_model());
    run.seeds = {1, 2};
    auto rep = multi_seed(run, cat, sp);
    ASSERT_EQ(rep.succeeded(), 2u);
    // aggregate recomputable from per-seed rows
    std::vector<double> acc;
    for (const auto& s : rep.seeds) acc.push_back(aggregates(s.rows).log10_accuracy);
    EXPECT_NEAR(rep.log10_accuracy.mean, mean_std(acc).mean, 1e-9);
    EXPECT_NEAR(rep.log10_accuracy.std, mean_std(acc).std, 1e-9);

    rep.seeds[1].ok = false;
    rep.seeds[1].error = "DivergedTraining: test";
    summarize(rep);
    const auto j = report_json(run, rep);
    EXPECT_EQ(j["seeds"].size(), 1u);
    EXPECT_EQ(j["failures"].size(), 1u);
    EXPECT_EQ(j["failures"][0]["seed"], 2);
    for (const char* k : {"log10_accuracy", "n_mse", "r_squared"}) {
        ASSERT_TRUE(j["aggregate"].contains(k));
        if (!j["aggregate"][k].is_null()) {
            EXPECT_TRUE(j["aggregate"][k].contains("mean"));
            EXPECT_TRUE(j["aggregate"][k].contains("std"));
        }
    }
    const auto grid = metric_grid_csv({j, j});
    EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 3);
    EXPECT_NE(grid.find("vgg_lstm"), std::string::npos);
}

}  // namespace
}  // namespace tactile
