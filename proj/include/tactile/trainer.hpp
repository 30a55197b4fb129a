#pragma once

// Training loop, evaluation and the multi-seed runner.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tactile/metrics.hpp"
#include "tactile/models.hpp"
#include "tactile/nn/checkpoint.hpp"
#include "tactile/pipeline.hpp"
#include "tactile/reports.hpp"

namespace tactile {

enum class Sampling { Random, Balanced };

inline std::string to_string(Sampling s) { return s == Sampling::Random ? "random" : "balanced"; }

inline Sampling parse_sampling(const std::string& s) {
    if (s == "random") return Sampling::Random;
    if (s == "balanced") return Sampling::Balanced;
    fail(ErrorKind::InvalidArgument, "sampling must be random or balanced, got '" + s + "'");
}

struct RunConfig {
    ModelConfig model;
    SplitMode split_mode = SplitMode::SeenObject;
    Sampling sampling = Sampling::Balanced;
    BalanceConfig balance;
    AugmentConfig augment;
    int epochs = 100;
    int batch_size = 32;
    double lr = 1e-4;
    int patience = 10;  // epochs without validation improvement before stopping; 0 disables
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    ModulusBounds bounds;

    void validate() const {
        model.validate();
        balance.validate();
        augment.validate();
        bounds.validate();
        require(epochs >= 1, ErrorKind::InvalidArgument, "epochs must be >= 1");
        require(batch_size >= 1, ErrorKind::InvalidArgument, "batch_size must be >= 1");
        require(lr > 0 && std::isfinite(lr), ErrorKind::InvalidArgument, "lr must be positive");
        require(patience >= 0, ErrorKind::InvalidArgument, "patience must be >= 0");
        require(!seeds.empty(), ErrorKind::InvalidArgument, "seeds must be nonempty");
    }
};

// ---------------------------------------------------------------------------
// JSON forms used in checkpoints and reports

inline nlohmann::ordered_json model_config_json(const ModelConfig& m) {
    nlohmann::ordered_json j;
    j["architecture"] = to_string(m.architecture);
    j["strategy"] = to_string(m.strategy);
    j["image_size"] = m.image_size;
    j["encoder_channels"] = m.encoder_channels;
    j["embed"] = m.embed;
    j["shared_encoder"] = m.shared_encoder;
    j["lstm_hidden"] = m.lstm_hidden;
    j["tf_dim"] = m.tf_dim;
    j["tf_heads"] = m.tf_heads;
    j["tf_depth"] = m.tf_depth;
    j["tf_ffn"] = m.tf_ffn;
    j["pos_dim"] = m.pos_dim;
    j["tf_pre_norm"] = m.tf_pre_norm;
    j["decoder"] = m.decoder;
    j["small_decoder"] = m.small_decoder;
    j["l2_lambda"] = m.loss.l2_lambda;
    return j;
}

inline ModelConfig model_config_from_json(const nlohmann::ordered_json& j) {
    try {
        ModelConfig m;
        m.architecture = parse_architecture(j.at("architecture").get<std::string>());
        m.strategy = parse_strategy(j.at("strategy").get<std::string>());
        m.image_size = j.at("image_size").get<int>();
        m.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
        m.embed = j.at("embed").get<int>();
        m.shared_encoder = j.at("shared_encoder").get<bool>();
        m.lstm_hidden = j.at("lstm_hidden").get<int>();
        m.tf_dim = j.at("tf_dim").get<int>();
        m.tf_heads = j.at("tf_heads").get<int>();
        m.tf_depth = j.at("tf_depth").get<int>();
        m.tf_ffn = j.at("tf_ffn").get<int>();
        m.pos_dim = j.at("pos_dim").get<int>();
        m.tf_pre_norm = j.value("tf_pre_norm", false);
        m.decoder = j.at("decoder").get<std::vector<int>>();
        m.small_decoder = j.at("small_decoder").get<std::vector<int>>();
        m.loss.l2_lambda = j.at("l2_lambda").get<double>();
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ConfigParseError, std::string("model config: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Features

/// Resized, normalized per-grasp inputs keyed by grasp_id.
class FeatureCache {
public:
    FeatureCache(const Catalog& c, int image_size, const ModulusBounds& b) {
        for (const auto& g : c.grasps) features_.emplace(g.grasp_id, make_features(g, c.object_of(g).young_modulus_pa, image_size, b));
    }

    const GraspFeatures& at(const std::string& id) const {
        auto it = features_.find(id);
        require(it != features_.end(), ErrorKind::UnknownKey, "unknown grasp_id " + id);
        return it->second;
    }

private:
    std::map<std::string, GraspFeatures> features_;
};

/// Packs ids[begin, end); with `aug`, frames are augmented with a seed derived
/// from (aug_seed, position in the list).
inline GraspBatch make_batch(const FeatureCache& fc, const std::vector<std::string>& ids, std::size_t begin, std::size_t end, InputStrategy s,
                             const AugmentConfig* aug = nullptr, std::uint64_t aug_seed = 0) {
    std::vector<const GraspFeatures*> items;
    for (std::size_t i = begin; i < end; ++i) items.push_back(&fc.at(ids[i]));
    if (!aug) return pack_batch(items, s);
    std::vector<std::array<TactileFrame, 3>> frames;
    for (std::size_t i = begin; i < end; ++i) frames.push_back(augment_grasp(items[i - begin]->frames, *aug, derive_seed(aug_seed, i)));
    return pack_batch(items, s, &frames);
}

// ---------------------------------------------------------------------------
// Training

struct EpochStats {
    int epoch = 0;
    double train_loss = 0;  // mean batch loss including the L2 term
    double val_loss = 0;    // MSE on the (balanced, augmented) validation set
};

struct TrainResult {
    nn::ParamStore<float> params;  // best validation-loss weights
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_loss = 0;
};

/// Every grasp in the split must carry estimates when the strategy needs them.
inline void check_strategy_inputs(const Catalog& c, const std::vector<std::string>& ids, InputStrategy s) {
    if (!uses_estimates(s)) return;
    for (const auto& id : ids)
        require(c.grasp(id).estimates.has_value(), ErrorKind::StrategyMismatch, "strategy ALL needs analytical estimates; grasp " + id + " has none");
}

inline double batch_mse(const std::vector<float>& pred, const std::vector<double>& targets) {
    double s = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) s += (pred[i] - targets[i]) * (pred[i] - targets[i]);
    return s;
}

using EpochCallback = std::function<void(const EpochStats&)>;

inline TrainResult train(const RunConfig& run, const Catalog& catalog, const SplitSet& split, std::uint64_t seed, const EpochCallback& on_epoch = {}) {
    run.validate();
    const auto problem = check_split(split, catalog);
    require(problem.empty(), ErrorKind::InvalidArgument, "split does not match catalog: " + problem);
    require(!split.train.empty() && !split.validation.empty(), ErrorKind::InvalidArgument, "train and validation sets must be nonempty");
    const InputStrategy strategy = run.model.strategy;
    check_strategy_inputs(catalog, split.train, strategy);
    check_strategy_inputs(catalog, split.validation, strategy);

    const Model model(run.model);
    const FeatureCache fc(catalog, run.model.image_size, run.bounds);
    nn::ParamStore<float> store;
    {
        std::mt19937_64 rng(derive_seed(seed, "init"));
        model.init(store, rng);
    }
    const nn::AdamConfig adam{run.lr};

    // validation: balanced and augmented once, with fixed seeds
    const auto val_ids = run.sampling == Sampling::Balanced ? balance(split.validation, catalog, run.balance, derive_seed(seed, "val-balance"))
                                                            : split.validation;
    std::vector<GraspBatch> val_batches;
    for (std::size_t b = 0; b < val_ids.size(); b += run.batch_size)
        val_batches.push_back(make_batch(fc, val_ids, b, std::min(val_ids.size(), b + run.batch_size), strategy, &run.augment, derive_seed(seed, "val-aug")));

    auto validation_loss = [&] {
        double s = 0;
        for (const auto& vb : val_batches) {
            nn::Tape<float> tape;
            s += batch_mse(model.forward(tape, store, vb).value().data, vb.targets);
        }
        return s / static_cast<double>(val_ids.size());
    };

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    long step = 0;
    int since_best = 0;
    for (int epoch = 1; epoch <= run.epochs; ++epoch) {
        std::vector<std::string> ids;
        if (run.sampling == Sampling::Balanced) {
            ids = balance(split.train, catalog, run.balance, derive_seed(seed, "balance", epoch));
        } else {
            ids = split.train;
            std::mt19937_64 rng(derive_seed(seed, "shuffle", epoch));
            shuffle(ids, rng);
        }
        double loss_sum = 0;
        int batches = 0;
        for (std::size_t b = 0; b < ids.size(); b += run.batch_size) {
            const auto batch = make_batch(fc, ids, b, std::min(ids.size(), b + run.batch_size), strategy, &run.augment, derive_seed(seed, "aug", epoch));
            std::vector<float> targets(batch.targets.begin(), batch.targets.end());
            store.zero_grad();
            nn::Tape<float> tape;
            auto pred = model.forward(tape, store, batch);
            auto loss = nn::mse_l2_loss(tape, pred, targets, store, run.model.loss);
            const double lv = loss.value()[0];
            require(std::isfinite(lv), ErrorKind::DivergedTraining,
                    "loss is " + io::fmt_double(lv) + " at epoch " + std::to_string(epoch) + ", step " + std::to_string(step + 1) + " (seed " +
                        std::to_string(seed) + "); try a lower lr");
            tape.backward(loss);
            nn::adam_step(store, adam, ++step);
            loss_sum += lv;
            ++batches;
        }
        EpochStats st{epoch, loss_sum / batches, validation_loss()};
        require(std::isfinite(st.val_loss), ErrorKind::DivergedTraining, "validation loss is not finite at epoch " + std::to_string(epoch));
        result.history.push_back(st);
        if (on_epoch) on_epoch(st);
        if (st.val_loss < result.best_val_loss) {
            result.best_val_loss = st.val_loss;
            result.best_epoch = epoch;
            result.params = store.cast<float>();
            since_best = 0;
        } else if (run.patience > 0 && ++since_best >= run.patience) {
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Predictions in [0, 1] normalized space, clamped to the bounds.
inline std::vector<double> predict(const Model& model, nn::ParamStore<float>& params, const FeatureCache& fc, const std::vector<std::string>& ids,
                                   int batch_size = 64) {
    std::vector<double> out;
    for (std::size_t b = 0; b < ids.size(); b += batch_size) {
        const auto batch = make_batch(fc, ids, b, std::min(ids.size(), b + static_cast<std::size_t>(batch_size)), model.config().strategy);
        nn::Tape<float> tape;
        for (float v : model.forward(tape, params, batch).value().data) out.push_back(std::clamp(static_cast<double>(v), 0.0, 1.0));
    }
    return out;
}

/// One row per distinct test grasp; test data is never augmented or balanced.
inline std::vector<PredictionRow> evaluate(const ModelConfig& cfg, nn::ParamStore<float>& params, const Catalog& catalog,
                                           const std::vector<std::string>& ids, const ModulusBounds& b = {}) {
    require(!ids.empty(), ErrorKind::InvalidArgument, "nothing to evaluate");
    check_strategy_inputs(catalog, ids, cfg.strategy);
    const Model model(cfg);
    std::vector<std::string> unique = ids;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    const FeatureCache fc(catalog, cfg.image_size, b);
    const auto preds = predict(model, params, fc, unique);
    std::vector<PredictionRow> rows;
    for (std::size_t i = 0; i < unique.size(); ++i) {
        const auto& g = catalog.grasp(unique[i]);
        const auto& m = catalog.object_of(g);
        PredictionRow r;
        r.grasp_id = g.grasp_id;
        r.truth_pa = m.young_modulus_pa;
        r.pred_pa = denormalize_young(preds[i], b);
        r.material = to_string(m.material);
        r.shape = to_string(m.shape);
        r.se = squared_error_norm(r.pred_pa, r.truth_pa, b);
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline std::string checkpoint_meta(const RunConfig& run, std::uint64_t seed, const TrainResult& tr) {
    nlohmann::ordered_json j;
    j["model"] = model_config_json(run.model);
    j["bounds"] = {run.bounds.log10_min, run.bounds.log10_max};
    j["seed"] = seed;
    j["best_epoch"] = tr.best_epoch;
    j["best_val_loss"] = tr.best_val_loss;
    return j.dump();
}

struct LoadedModel {
    ModelConfig config;
    ModulusBounds bounds;
    nn::ParamStore<float> params;
};

/// Reads a checkpoint and checks its parameters against a freshly built model.
inline LoadedModel load_model(const io::fs::path& path) {
    auto ck = nn::load_checkpoint(path);
    nlohmann::ordered_json meta;
    try {
        meta = nlohmann::ordered_json::parse(ck.meta);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::IoError, "checkpoint metadata is not JSON: " + std::string(e.what()));
    }
    LoadedModel lm;
    lm.config = model_config_from_json(meta.at("model"));
    lm.bounds = {meta.at("bounds")[0].get<double>(), meta.at("bounds")[1].get<double>()};
    std::mt19937_64 rng(0);
    Model(lm.config).init(lm.params, rng);
    lm.params.assign_values(ck.params);
    return lm;
}

// ---------------------------------------------------------------------------
// Multi-seed runs

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    ErrorKind error_kind = ErrorKind::InvalidArgument;
    TrainResult training;
    std::vector<PredictionRow> rows;
    Aggregates metrics;
};

struct MultiSeedReport {
    std::vector<SeedOutcome> seeds;  // in configured order
    MeanStd log10_accuracy;
    MeanStd n_mse;
    std::optional<MeanStd> r_squared;

    std::size_t succeeded() const {
        std::size_t n = 0;
        for (const auto& s : seeds) n += s.ok;
        return n;
    }
};

/// Mean and sample std over the successful seeds, in seed order.
inline void summarize(MultiSeedReport& rep) {
    std::vector<double> acc, nm, r2;
    bool all_r2 = true;
    for (const auto& s : rep.seeds) {
        if (!s.ok) continue;
        acc.push_back(s.metrics.log10_accuracy);
        nm.push_back(s.metrics.n_mse);
        if (s.metrics.r_squared)
            r2.push_back(*s.metrics.r_squared);
        else
            all_r2 = false;
    }
    require(!acc.empty(), ErrorKind::DivergedTraining, "every seed failed");
    rep.log10_accuracy = mean_std(acc);
    rep.n_mse = mean_std(nm);
    if (all_r2) rep.r_squared = mean_std(r2);
    else rep.r_squared.reset();
}

using SeedCallback = std::function<void(const SeedOutcome&)>;

/// Trains and evaluates once per seed. Training failures are recorded per seed;
/// the report needs at least one success.
inline MultiSeedReport multi_seed(const RunConfig& run, const Catalog& catalog, const SplitSet& split, const SeedCallback& on_seed = {}) {
    run.validate();
    MultiSeedReport rep;
    for (auto seed : run.seeds) {
        SeedOutcome o;
        o.seed = seed;
        try {
            o.training = train(run, catalog, split, seed);
            o.rows = evaluate(run.model, o.training.params, catalog, split.test, run.bounds);
            o.metrics = aggregates(o.rows, run.bounds);
            o.ok = true;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::DivergedTraining) throw;
            o.error = e.what();
            o.error_kind = e.kind();
        }
        if (on_seed) on_seed(o);
        rep.seeds.push_back(std::move(o));
    }
    summarize(rep);
    return rep;
}

inline nlohmann::ordered_json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

inline nlohmann::ordered_json aggregates_json(const Aggregates& a) {
    nlohmann::ordered_json j;
    j["log10_accuracy"] = a.log10_accuracy;
    j["n_mse"] = a.n_mse;
    j["r_squared"] = a.r_squared ? nlohmann::ordered_json(*a.r_squared) : nlohmann::ordered_json(nullptr);
    return j;
}

/// report.json layout: one architecture x strategy cell of the comparison grid.
inline nlohmann::ordered_json report_json(const RunConfig& run, const MultiSeedReport& rep) {
    nlohmann::ordered_json j;
    j["architecture"] = to_string(run.model.architecture);
    j["strategy"] = to_string(run.model.strategy);
    j["split_mode"] = to_string(run.split_mode);
    j["sampling"] = to_string(run.sampling);
    j["aggregate"] = {{"log10_accuracy", mean_std_json(rep.log10_accuracy)},
                      {"n_mse", mean_std_json(rep.n_mse)},
                      {"r_squared", rep.r_squared ? mean_std_json(*rep.r_squared) : nlohmann::ordered_json(nullptr)}};
    j["seeds"] = nlohmann::ordered_json::array();
    j["failures"] = nlohmann::ordered_json::array();
    for (const auto& s : rep.seeds) {
        if (!s.ok) {
            j["failures"].push_back({{"seed", s.seed}, {"error", s.error}});
            continue;
        }
        auto e = aggregates_json(s.metrics);
        e["seed"] = s.seed;
        e["test_rows"] = s.rows.size();
        e["best_epoch"] = s.training.best_epoch;
        e["epochs_run"] = s.training.history.size();
        j["seeds"].push_back(e);
    }
    return j;
}

/// Rows of the strategy x metric grid, one per report.json.
inline std::string metric_grid_csv(const std::vector<nlohmann::ordered_json>& reports) {
    std::string out = io::csv_line({"architecture", "strategy", "split_mode", "log10_accuracy_mean", "log10_accuracy_std", "n_mse_mean", "n_mse_std",
                                    "r_squared_mean", "r_squared_std"});
    auto cell = [](const nlohmann::ordered_json& m, const char* k) { return m.is_null() ? std::string() : io::fmt_double(m.at(k).get<double>()); };
    for (const auto& r : reports) {
        const auto& a = r.at("aggregate");
        out += io::csv_line({r.at("architecture").get<std::string>(), r.at("strategy").get<std::string>(), r.at("split_mode").get<std::string>(),
                             cell(a.at("log10_accuracy"), "mean"), cell(a.at("log10_accuracy"), "std"), cell(a.at("n_mse"), "mean"),
                             cell(a.at("n_mse"), "std"), cell(a.at("r_squared"), "mean"), cell(a.at("r_squared"), "std")});
    }
    return out;
}

}  // namespace tactile
