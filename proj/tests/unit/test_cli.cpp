#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "../support/temp_dir.hpp"
#include "lrep/cli/cli.hpp"
#include "lrep/dataset/episode.hpp"
#include "lrep/decoder/checkpoint.hpp"
#include "lrep/representation/lrep_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using lrep::cli::run;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;

    json result() const { return json::parse(out); }
};

Outcome call(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string s(const fs::path& p) { return p.string(); }

std::size_t line_count(const fs::path& p) {
    const std::string text = lrep::representation::read_file(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::set<std::string> listing(const fs::path& dir) {
    std::set<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) out.insert(e.path().string());
    return out;
}

// Synthetic manifest, features and split under `root`.
void make_synthetic(const fs::path& root, std::size_t episodes, const std::string& extra = "") {
    std::vector<std::string> args = {"synth", "--episodes", std::to_string(episodes), "--seed", "7", "--out", s(root)};
    if (!extra.empty()) {
        args.push_back("--video-frames");
        args.push_back(extra);
    }
    ASSERT_EQ(call(args).code, 0);
}

}  // namespace

TEST(Cli, NoArgumentsIsUsage) {
    const Outcome o = call({});
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.err.find("Usage"), std::string::npos);
}

TEST(Cli, UnknownCommandAndFlagAreUsage) {
    EXPECT_EQ(call({"frobnicate"}).code, 2);
    EXPECT_EQ(call({"gradcheck", "--bogus"}).code, 2);
    EXPECT_EQ(call({"split", "--sizes", "1,1,1"}).code, 2);  // missing --manifest
    EXPECT_EQ(call({"--help"}).code, 0);
}

TEST(Cli, GradcheckReportsErrorBelowTolerance) {
    fixture::TempDir dir;
    for (const char* mode : {"cross", "self"}) {
        const Outcome o = call({"gradcheck", "--dims", "4", "--mode", mode, "--seed", "3", "--out", s(dir.path())});
        ASSERT_EQ(o.code, 0) << o.err;
        const json r = o.result();
        EXPECT_LT(r["max_relative_error"].get<double>(), 1e-4);
        EXPECT_TRUE(r["pass"].get<bool>());
        EXPECT_EQ(r["config_digest"].get<std::string>().size(), 16u);
    }
    EXPECT_TRUE(fs::exists(dir.path() / "gradcheck.json"));
}

TEST(Cli, GradcheckFailsWithHugeStep) {
    fixture::TempDir dir;
    const Outcome o = call({"gradcheck", "--dims", "4", "--step", "0.5", "--out", s(dir.path())});
    EXPECT_EQ(o.code, 1);
    EXPECT_EQ(json::parse(o.err)["error"]["kind"], "numeric");
}

TEST(Cli, FixtureStatsSplitAndCleanse) {
    fixture::TempDir dir;
    const fs::path root = dir.path();
    ASSERT_EQ(call({"synth", "--sprt1-fixture", "--out", s(root / "fx")}).code, 0);
    const std::string manifest = s(root / "fx" / "manifest.jsonl");

    const Outcome st = call({"stats", "--manifest", manifest, "--out", s(root / "stats")});
    ASSERT_EQ(st.code, 0) << st.err;
    EXPECT_EQ(st.result()["total"], 13915);
    EXPECT_EQ(st.result()["positives"], 10000);
    EXPECT_EQ(st.result()["vocab_size"], 49);

    const Outcome sp = call({"split", "--manifest", manifest, "--sizes", "11915,1000,1000", "--seed", "1", "--out",
                             s(root / "split")});
    ASSERT_EQ(sp.code, 0) << sp.err;
    EXPECT_EQ(line_count(root / "split" / "train.txt"), 11915u);
    EXPECT_EQ(line_count(root / "split" / "val.txt"), 1000u);
    EXPECT_EQ(line_count(root / "split" / "test.txt"), 1000u);
    EXPECT_EQ(call({"split", "--manifest", manifest, "--sizes", "10,1,1", "--out", s(root / "bad")}).code, 1);
    EXPECT_EQ(call({"split", "--manifest", manifest, "--sizes", "a,b", "--out", s(root / "bad")}).code, 1);

    const Outcome cl = call({"cleanse", "--manifest", manifest, "--seed", "4", "--out", s(root / "clean")});
    ASSERT_EQ(cl.code, 0) << cl.err;
    EXPECT_EQ(cl.result()["replaced"], 1707);
    const auto before = lrep::dataset::load_manifest(manifest);
    const auto after = lrep::dataset::load_manifest(root / "clean" / "manifest.jsonl");
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(before[i].label, after[i].label);
}

TEST(Cli, TrainEvalAblateVideoPipeline) {
    fixture::TempDir dir;
    const fs::path root = dir.path();
    make_synthetic(root / "syn", 90);
    const std::string manifest = s(root / "syn" / "manifest.jsonl");
    const std::string features = s(root / "syn" / "features");
    ASSERT_EQ(call({"split", "--manifest", manifest, "--sizes", "60,15,15", "--out", s(root / "split")}).code, 0);
    const std::string split = s(root / "split" / "split.json");
    const auto inputs = listing(root / "syn");

    const Outcome tr = call({"train", "--manifest", manifest, "--features", features, "--split", split, "--epochs", "2",
                             "--out", s(root / "run")});
    ASSERT_EQ(tr.code, 0) << tr.err;
    const json run_json = tr.result();
    EXPECT_EQ(run_json["train_loss"].size(), 2u);
    EXPECT_TRUE(fs::exists(root / "run" / "run.csv"));
    EXPECT_EQ(listing(root / "syn"), inputs);

    const Outcome ev = call({"eval", "--manifest", manifest, "--features", features, "--checkpoint",
                             s(root / "run" / "model.lrck"), "--split", split, "--out", s(root / "eval")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    EXPECT_EQ(ev.result()["confusion"], run_json["test"]);

    const Outcome ab = call({"ablate", "--manifest", manifest, "--features", features, "--split", split, "--epochs",
                             "1", "--conditions", "representation", "--jobs", "2", "--out", s(root / "ablate")});
    ASSERT_EQ(ab.code, 0) << ab.err;
    EXPECT_EQ(ab.result()["rows"].size(), 7u);
    EXPECT_EQ(line_count(root / "ablate" / "ablation.csv"), 8u);

    make_synthetic(root / "vid", 6, "16");
    const Outcome vi = call({"video", "--manifest", s(root / "vid" / "manifest.jsonl"), "--features",
                             s(root / "vid" / "features"), "--checkpoint", s(root / "run" / "model.lrck"), "--out",
                             s(root / "video")});
    ASSERT_EQ(vi.code, 0) << vi.err;
    ASSERT_EQ(vi.result()["videos"].size(), 6u);
    EXPECT_EQ(vi.result()["videos"][0]["probabilities"].size(), 15u);
}

TEST(Cli, ConfigFileMergesUnderFlags) {
    fixture::TempDir dir;
    const fs::path root = dir.path();
    make_synthetic(root / "syn", 40);
    const std::string manifest = s(root / "syn" / "manifest.jsonl");
    const std::string features = s(root / "syn" / "features");
    lrep::representation::write_file(root / "cfg.json",
                                     json{{"seed", 5}, {"train", {{"epochs", 2}, {"decoder", {{"d_model", 8}}}}}}.dump());
    const std::vector<std::string> base = {"train",   "--manifest", manifest, "--features", features, "--sizes",
                                           "20,10,10", "--config",   s(root / "cfg.json")};

    auto args = base;
    args.insert(args.end(), {"--out", s(root / "a")});
    const Outcome a = call(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.result()["train_loss"].size(), 2u);
    EXPECT_EQ(a.result()["train_config"]["seed"], 5);
    EXPECT_EQ(a.result()["train_config"]["decoder"]["d_model"], 8);

    args = base;
    args.insert(args.end(), {"--epochs", "1", "--seed", "9", "--out", s(root / "b")});
    const Outcome b = call(args);
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(b.result()["train_loss"].size(), 1u);
    EXPECT_EQ(b.result()["train_config"]["seed"], 9);
    EXPECT_NE(a.result()["config_digest"], b.result()["config_digest"]);

    const auto ck = lrep::decoder::load_checkpoint(root / "b" / "model.lrck");
    EXPECT_EQ(ck.config["metadata"]["train_config"]["seed"], 9);
}

TEST(Cli, RuntimeErrorsAreStructured) {
    fixture::TempDir dir;
    lrep::representation::write_file(dir.path() / "bad.jsonl", "{\"episode_id\":\"a\"}\n");
    const Outcome o = call({"stats", "--manifest", s(dir.path() / "bad.jsonl"), "--out", s(dir.path())});
    EXPECT_EQ(o.code, 1);
    const json e = json::parse(o.err);
    EXPECT_EQ(e["error"]["kind"], "parse");
    EXPECT_NE(e["error"]["message"].get<std::string>().find("line 1"), std::string::npos);

    lrep::representation::write_file(dir.path() / "cfg.json", "[1,2]");
    EXPECT_EQ(call({"params", "--config", s(dir.path() / "cfg.json"), "--out", s(dir.path())}).code, 1);
}

TEST(Cli, ParamsCountsTheConfiguredModel) {
    fixture::TempDir dir;
    const Outcome paper = call({"params", "--out", s(dir.path())});
    ASSERT_EQ(paper.code, 0) << paper.err;
    const json r = paper.result();
    EXPECT_EQ(r["projections"], 9728 * 256);
    EXPECT_EQ(r["total"].get<std::size_t>(), r["projections"].get<std::size_t>() + r["diff_attention"].get<std::size_t>() +
                                                   r["align_attention"].get<std::size_t>() + r["mlp"].get<std::size_t>());
    const Outcome desk = call({"params", "--profile", "desk", "--out", s(dir.path())});
    ASSERT_EQ(desk.code, 0);
    EXPECT_LT(desk.result()["total"].get<std::size_t>(), r["total"].get<std::size_t>());
}
