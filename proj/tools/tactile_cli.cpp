// tactile: command-line driver for ingest, synth, split, train, eval and report.
//
// Exit status: 0 ok, 2 configuration or invocation error, 3 data error,
// 4 training error, 1 anything else. Failures print one line to stderr:
//   error: kind=<Kind> exit=<n> message="<text>"

#include <chrono>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "tactile/config.hpp"
#include "tactile/ingest.hpp"
#include "tactile/reports.hpp"
#include "tactile/synth.hpp"
#include "tactile/trainer.hpp"

namespace fs = std::filesystem;
using namespace tactile;
using Json = nlohmann::ordered_json;

namespace {

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::ConfigParseError:
        case ErrorKind::InvalidArgument:
            return 2;
        case ErrorKind::DivergedTraining:
        case ErrorKind::UninitializedGradients:
        case ErrorKind::ShapeMismatch:
        case ErrorKind::HeadDivisibility:
        case ErrorKind::LengthMismatch:
            return 4;
        default:
            return 3;
    }
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out + "\"";
}

int report_error(const std::string& kind, int code, const std::string& msg) {
    std::cerr << "error: kind=" << kind << " exit=" << code << " message=" << quoted(msg) << "\n";
    return code;
}

std::string toolchain() {
#if defined(__clang__)
    return "clang " __clang_version__;
#elif defined(__GNUC__)
    return "gcc " __VERSION__;
#else
    return "unknown";
#endif
}

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string data;
};

void add_common(CLI::App* app, Common& c, bool data = true) {
    app->add_option("--config", c.config, "TOML config file");
    app->add_option("--set", c.sets, "dotted.key=value override (repeatable)")->take_all();
    app->add_option("--seed", c.seed, "base seed");
    app->add_option("--out", c.out, "output directory");
    if (data) app->add_option("--data", c.data, "canonical dataset root (default: data.root)");
}

Config load_config(const Common& cm) {
    Config c;
    if (!cm.config.empty()) c.merge_file(cm.config);
    for (const auto& s : cm.sets) c.override_with(s);
    if (cm.seed) c.set("seed", Json(*cm.seed), "--seed");
    if (!cm.data.empty()) c.set("data.root", Json(cm.data), "--data");
    return c;
}

std::uint64_t seed_of(const Config& c) { return static_cast<std::uint64_t>(c.integer("seed")); }

fs::path out_dir(const Common& cm, const std::string& fallback) {
    const fs::path p = cm.out.empty() ? fs::path(fallback) : fs::path(cm.out);
    fs::create_directories(p);
    return p;
}

void write_manifest(const fs::path& dir, const std::string& command, const Config& c, const Json& extra = Json::object()) {
    Json j;
    j["command"] = command;
    j["config_hash"] = c.hash();
    j["seed"] = seed_of(c);
    j["toolchain"] = toolchain();
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    j["config"] = Json::parse(c.canonical());
    io::write_text(dir / "run-manifest.json", j.dump(2) + "\n");
}

/// `needs` is the strategy about to consume the data; a dataset with no
/// estimates at all is reported as a strategy mismatch rather than an empty clean.
Catalog load_clean(const Config& c, std::optional<InputStrategy> needs = std::nullopt) {
    std::size_t rejected = 0;
    const auto raw = load_catalog(c.str("data.root"), &rejected);
    if (needs && uses_estimates(*needs))
        require(std::any_of(raw.grasps.begin(), raw.grasps.end(), [](const GraspRecord& g) { return g.estimates.has_value(); }),
                ErrorKind::StrategyMismatch, "strategy " + to_string(*needs) + " needs analytical estimates and " + c.str("data.root") + " has none");
    if (rejected) std::cerr << "warning: " << rejected << " malformed rows skipped while loading " << c.str("data.root") << "\n";
    auto cat = clean(raw);
    if (cat.grasps.size() != raw.grasps.size())
        std::cerr << "cleaning dropped " << raw.grasps.size() - cat.grasps.size() << " of " << raw.grasps.size() << " grasps\n";
    return cat;
}

SplitSet split_for(const std::string& split_path, const Catalog& cat, SplitMode mode, std::uint64_t seed) {
    SplitSet s = split_path.empty() ? split(cat, mode, seed) : split_from_json(io::read_text(split_path));
    const auto why = check_split(s, cat);
    require(why.empty(), ErrorKind::UnknownObjectId, "split does not match dataset: " + why);
    return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Common& cm, const std::string& raw) {
    const auto c = load_config(cm);
    const auto out = out_dir(cm, c.str("data.root"));
    IngestReport rep;
    const auto cat = ingest_native(raw, rep);
    require(!cat.grasps.empty(), ErrorKind::EmptyAfterCleaning, "no usable grasps under " + raw);
    write_catalog(out, cat);
    std::string log;
    for (const auto& f : rep.failures) {
        std::cerr << "skipped: " << f << "\n";
        log += f + "\n";
    }
    io::write_text(out / "ingest-log.txt", log);
    write_manifest(out, "ingest", c, {{"raw", raw}, {"objects", rep.objects}, {"grasps", rep.grasps}, {"skipped", rep.failures.size()}});
    std::cout << "ingested " << rep.grasps << " grasps of " << rep.objects << " objects into " << out.string() << " (" << rep.failures.size()
              << " skipped)\n";
    return 0;
}

int cmd_synth(const Common& cm) {
    const auto c = load_config(cm);
    const auto sc = synth_config(c);
    const auto cp = contact_params(c);
    const auto out = out_dir(cm, c.str("data.root"));
    const auto t0 = std::chrono::steady_clock::now();
    const auto cat = synth_catalog(sc, cp);
    write_synth_dataset(out, sc, cp, cat);
    write_manifest(out, "synth", c);
    std::cout << "wrote " << cat.grasps.size() << " grasps of " << cat.objects.size() << " objects to " << out.string() << " in "
              << seconds_since(t0) << " s\n";
    return 0;
}

int cmd_split(const Common& cm, const std::string& mode_flag) {
    auto c = load_config(cm);
    if (!mode_flag.empty()) c.set("train.split_mode", Json(mode_flag), "--mode");
    const auto mode = parse_split_mode(c.str("train.split_mode"));
    const auto cat = load_clean(c);
    const auto s = split(cat, mode, seed_of(c));
    const auto out = out_dir(cm, ".");
    io::write_text(out / "split.json", split_to_json(s));
    write_manifest(out, "split", c, {{"data", c.str("data.root")}});
    std::cout << "split " << to_string(mode) << ": train " << s.train.size() << ", validation " << s.validation.size() << ", test " << s.test.size()
              << " -> " << (out / "split.json").string() << "\n";
    return 0;
}

std::string history_csv(const std::vector<EpochStats>& h) {
    std::string out = "epoch,train_loss,val_loss\n";
    for (const auto& e : h) out += io::csv_line({std::to_string(e.epoch), io::fmt_double(e.train_loss), io::fmt_double(e.val_loss)});
    return out;
}

int cmd_train(const Common& cm, const std::string& split_path, const std::string& seeds_flag) {
    auto c = load_config(cm);
    if (!seeds_flag.empty()) {
        Json arr = Json::array();
        for (auto s : parse_seed_list(seeds_flag)) arr.push_back(s);
        c.set("train.seeds", arr, "--seeds");
    }
    auto run = run_config(c);
    const auto cat = load_clean(c, run.model.strategy);
    const auto sp = split_for(split_path, cat, run.split_mode, seed_of(c));
    run.split_mode = sp.mode;  // a split file overrides train.split_mode
    for (const auto* ids : {&sp.train, &sp.validation, &sp.test}) check_strategy_inputs(cat, *ids, run.model.strategy);
    const auto out = out_dir(cm, "runs/" + to_string(run.model.architecture) + "-" + to_string(run.model.strategy));
    write_manifest(out, "train", c, {{"data", c.str("data.root")}, {"split", split_path}});
    io::write_text(out / "split.json", split_to_json(sp));

    auto t0 = std::chrono::steady_clock::now();
    const auto rep = multi_seed(run, cat, sp, [&](const SeedOutcome& o) {
        const auto dir = out / ("seed-" + std::to_string(o.seed));
        fs::create_directories(dir);
        if (!o.ok) {
            std::cerr << "seed " << o.seed << " failed: " << o.error << "\n";
            io::write_text(dir / "error.txt", o.error + "\n");
        } else {
            nn::save_checkpoint(dir / "checkpoint.tkcp", o.training.params, checkpoint_meta(run, o.seed, o.training));
            io::write_text(dir / "predictions.csv", predictions_csv(o.rows));
            io::write_text(dir / "history.csv", history_csv(o.training.history));
            io::write_text(dir / "scatter.svg", scatter_svg(o.rows, run.bounds, contact_params(c).sensor_modulus_pa,
                                                            to_string(run.model.architecture) + " " + to_string(run.model.strategy) + " seed " +
                                                                std::to_string(o.seed)));
            Json j = aggregates_json(o.metrics);
            j["seed"] = o.seed;
            j["best_epoch"] = o.training.best_epoch;
            j["best_val_loss"] = o.training.best_val_loss;
            io::write_text(dir / "report.json", j.dump(2) + "\n");
            std::cout << "seed " << o.seed << ": log10_accuracy " << o.metrics.log10_accuracy << ", n_mse " << o.metrics.n_mse << ", best epoch "
                      << o.training.best_epoch << " (" << seconds_since(t0) << " s)\n";
        }
        t0 = std::chrono::steady_clock::now();
    });
    io::write_text(out / "report.json", report_json(run, rep).dump(2) + "\n");
    std::cout << "mean log10_accuracy " << rep.log10_accuracy.mean << " (std " << rep.log10_accuracy.std << "), mean n_mse " << rep.n_mse.mean
              << " (std " << rep.n_mse.std << ") over " << rep.succeeded() << "/" << rep.seeds.size() << " seeds -> " << out.string() << "\n";
    return 0;
}

int cmd_eval(const Common& cm, const std::string& checkpoint, const std::string& split_path) {
    const auto c = load_config(cm);
    auto lm = load_model(checkpoint);
    const auto cat = load_clean(c, lm.config.strategy);
    const auto sp = split_for(split_path, cat, parse_split_mode(c.str("train.split_mode")), seed_of(c));
    check_strategy_inputs(cat, sp.test, lm.config.strategy);
    const auto rows = evaluate(lm.config, lm.params, cat, sp.test, lm.bounds);
    const auto agg = aggregates(rows, lm.bounds);
    const auto out = out_dir(cm, "eval");
    write_manifest(out, "eval", c, {{"checkpoint", checkpoint}, {"data", c.str("data.root")}, {"split", split_path}});
    Json j;
    j["architecture"] = to_string(lm.config.architecture);
    j["strategy"] = to_string(lm.config.strategy);
    j["split_mode"] = to_string(sp.mode);
    j["checkpoint"] = checkpoint;
    j["test_rows"] = rows.size();
    j["metrics"] = aggregates_json(agg);
    io::write_text(out / "report.json", j.dump(2) + "\n");
    io::write_text(out / "predictions.csv", predictions_csv(rows));
    io::write_text(out / "scatter.svg", scatter_svg(rows, lm.bounds, contact_params(c).sensor_modulus_pa, fs::path(checkpoint).filename().string()));
    std::cout << "log10_accuracy " << agg.log10_accuracy << ", n_mse " << agg.n_mse << " over " << rows.size() << " test grasps\n";
    return 0;
}

int cmd_report(const Common& cm, const std::string& predictions, const std::string& by) {
    const auto c = load_config(cm);
    const ModulusBounds b{c.num("bounds.log10_min"), c.num("bounds.log10_max")};
    const auto rows = read_predictions(predictions);
    const auto out = out_dir(cm, fs::path(predictions).parent_path().empty() ? "." : fs::path(predictions).parent_path().string());
    fs::path written;
    if (lowercase(by) == "window") {
        const auto ws = rolling_window_report(rows, c.integer("report.windows"), c.integer("report.span_decades"), seed_of(c),
                                              static_cast<int>(b.log10_min));
        written = out / "windows.csv";
        io::write_text(written, windows_csv(ws));
        for (const auto& w : ws) {
            std::cout << "[1e" << w.lo_decade << ", 1e" << w.hi_decade << ") ";
            if (w.empty) std::cout << "empty\n";
            else std::cout << "n_mse " << w.n_mse << " on " << w.used << " of " << w.available << "\n";
        }
    } else {
        const auto key = parse_breakdown_key(by);
        const auto bd = breakdown_report(rows, key, b);
        written = out / ("breakdown_" + to_string(key) + ".csv");
        io::write_text(written, breakdown_csv(bd, c.num("contact.sensor_modulus_pa")));
        for (const auto& g : bd.groups) std::cout << g.group << ": n=" << g.count << " log10_accuracy " << g.log10_accuracy << " n_mse " << g.n_mse << "\n";
    }
    write_manifest(out, "report", c, {{"predictions", predictions}, {"by", by}});
    std::cout << "-> " << written.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Young's modulus estimation from tactile grasps"};
    app.require_subcommand(1, 1);

    Common ingest_c, synth_c, split_c, train_c, eval_c, report_c;
    std::string raw, mode, split_path, seeds, checkpoint, eval_split, predictions, by;

    auto* ingest = app.add_subcommand("ingest", "convert a native dataset into the canonical layout");
    add_common(ingest, ingest_c, false);
    ingest->add_option("--raw", raw, "native dataset directory")->required();

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, synth_c, false);

    auto* splitc = app.add_subcommand("split", "write a train/validation/test split");
    add_common(splitc, split_c);
    splitc->add_option("--mode", mode, "seen | unseen");

    auto* trainc = app.add_subcommand("train", "train one model per seed and evaluate it");
    add_common(trainc, train_c);
    trainc->add_option("--split", split_path, "split.json (default: fresh split from --seed)");
    trainc->add_option("--seeds", seeds, "seed list such as 0-9 or 1,3,5");

    auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on the test ids of a split");
    add_common(evalc, eval_c);
    evalc->add_option("--checkpoint", checkpoint)->required();
    evalc->add_option("--split", eval_split, "split.json (default: fresh split from --seed)");

    auto* reportc = app.add_subcommand("report", "rolling-window or per-group report from predictions.csv");
    add_common(reportc, report_c, false);
    reportc->add_option("--predictions", predictions)->required();
    reportc->add_option("--by", by, "material | shape | window")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("ConfigParseError", 2, e.what());
    }

    try {
        if (*ingest) return cmd_ingest(ingest_c, raw);
        if (*synth) return cmd_synth(synth_c);
        if (*splitc) return cmd_split(split_c, mode);
        if (*trainc) return cmd_train(train_c, split_path, seeds);
        if (*evalc) return cmd_eval(eval_c, checkpoint, eval_split);
        if (*reportc) return cmd_report(report_c, predictions, by);
    } catch (const Error& e) {
        return report_error(std::string(to_string(e.kind())), exit_code(e.kind()), e.what());
    } catch (const std::exception& e) {
        return report_error("Internal", 1, e.what());
    }
    return 1;
}
