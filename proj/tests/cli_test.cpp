#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_util.hpp"

namespace tactile {
namespace {

namespace fs = std::filesystem;

struct Result {
    int code;
    std::string err;
};

/// Runs the CLI inside `dir`, capturing stderr.
Result run(const fs::path& dir, const std::string& args) {
    const auto err = dir / "stderr.txt";
    const std::string cmd = "cd '" + dir.string() + "' && '" TACTILE_CLI "' " + args + " > stdout.txt 2> '" + err.string() + "'";
    const int st = std::system(cmd.c_str());
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, io::read_text(err)};
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_text(e.path());
    return out;
}

const char* kSmall = R"(seed = 3
[synth]
num_objects = 16
grasps_per_object = 3
image_size = 16
samples = 8
[model]
image_size = 8
encoder_channels = [4, 4]
embed = 8
lstm_hidden = 8
[train]
epochs = 2
batch_size = 8
lr = 1e-3
sampling = "random"
seeds = [0]
)";

class Cli : public ::testing::Test {
protected:
    void SetUp() override { io::write_text(dir_.path() / "small.toml", kSmall); }
    const fs::path& dir() const { return dir_.path(); }
    testing::TempDir dir_{"cli"};
};

TEST_F(Cli, SynthIsByteIdentical) {
    ASSERT_EQ(run(dir(), "synth --config small.toml --seed 7 --out a").code, 0);
    ASSERT_EQ(run(dir(), "synth --config small.toml --seed 7 --out b").code, 0);
    const auto a = tree(dir() / "a");
    EXPECT_GT(a.size(), 16u * 3u);
    EXPECT_EQ(a, tree(dir() / "b"));
    ASSERT_EQ(run(dir(), "synth --config small.toml --seed 8 --out c").code, 0);
    EXPECT_NE(a, tree(dir() / "c"));
    const auto m = nlohmann::json::parse(a.at("run-manifest.json"));
    EXPECT_EQ(m.at("seed"), 7);
    for (const char* k : {"config_hash", "toolchain", "config"}) EXPECT_TRUE(m.contains(k)) << k;
}

TEST_F(Cli, AllStrategyWithoutEstimatesIsDataError) {
    ASSERT_EQ(run(dir(), "synth --config small.toml --set synth.estimates=false --out d").code, 0);
    const auto r = run(dir(), "train --config small.toml --data d --set model.strategy=all");
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(r.err.rfind("error: kind=StrategyMismatch exit=3 message=", 0), 0u) << r.err;
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run(dir(), "synth --config small.toml --set synth.nope=1").code, 2);
    EXPECT_EQ(run(dir(), "synth --config missing.toml").code, 2);
    EXPECT_EQ(run(dir(), "").code, 2);
    EXPECT_EQ(run(dir(), "split --config small.toml --data nowhere").code, 3);
    ASSERT_EQ(run(dir(), "synth --config small.toml --out d").code, 0);
    const auto r = run(dir(), "train --config small.toml --data d --set train.lr=1e30 --out div");
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("kind=DivergedTraining"), std::string::npos);
}

TEST_F(Cli, TrainEvalReport) {
    ASSERT_EQ(run(dir(), "synth --config small.toml --out d").code, 0);
    ASSERT_EQ(run(dir(), "split --config small.toml --data d --mode unseen --seed 2 --out sp").code, 0);
    ASSERT_EQ(run(dir(), "train --config small.toml --data d --split sp/split.json --seeds 0,1 --out r1").code, 0);
    ASSERT_EQ(run(dir(), "train --config small.toml --data d --split sp/split.json --seeds 0,1 --out r2").code, 0);
    for (const char* f : {"report.json", "seed-0/checkpoint.tkcp", "seed-1/predictions.csv", "seed-1/report.json"})
        EXPECT_EQ(io::read_text(dir() / "r1" / f), io::read_text(dir() / "r2" / f)) << f;
    const auto rep = nlohmann::json::parse(io::read_text(dir() / "r1/report.json"));
    EXPECT_EQ(rep.at("seeds").size(), 2u);
    EXPECT_EQ(rep.at("split_mode"), "unseen");

    ASSERT_EQ(run(dir(), "eval --config small.toml --data d --checkpoint r1/seed-0/checkpoint.tkcp --split sp/split.json --out ev").code, 0);
    for (const char* f : {"report.json", "predictions.csv", "scatter.svg", "run-manifest.json"}) EXPECT_TRUE(fs::exists(dir() / "ev" / f)) << f;
    const auto ev = nlohmann::json::parse(io::read_text(dir() / "ev/report.json"));
    for (const char* k : {"log10_accuracy", "n_mse", "r_squared"}) EXPECT_TRUE(ev.at("metrics").contains(k)) << k;
    // evaluating the saved checkpoint reproduces the predictions written at training time
    EXPECT_EQ(io::read_text(dir() / "ev/predictions.csv"), io::read_text(dir() / "r1/seed-0/predictions.csv"));

    ASSERT_EQ(run(dir(), "report --predictions ev/predictions.csv --by window").code, 0);
    EXPECT_TRUE(fs::exists(dir() / "ev/windows.csv"));
    ASSERT_EQ(run(dir(), "report --predictions ev/predictions.csv --by shape --out rp").code, 0);
    EXPECT_TRUE(fs::exists(dir() / "rp/breakdown_shape.csv"));
    EXPECT_EQ(run(dir(), "report --predictions ev/predictions.csv --by colour").code, 3);
}

}  // namespace
}  // namespace tactile
