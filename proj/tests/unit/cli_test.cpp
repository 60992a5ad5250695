#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "wukong/cli.hpp"
#include "wukong/flops.hpp"

using namespace wukong;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char* kSynth =
    R"({"format": "synthetic", "num_features": 3, "cardinalities": [4], "target_order": 2, "num_examples": 200, "seed": 2})";

// A config without a schema; synthetic data supplies it.
std::filesystem::path schemaless_config(const std::filesystem::path& dir) {
  json j = config_to_json(fixtures::small_config(4, 1));
  j.erase("schema");
  std::ofstream(dir / "model.json") << j.dump();
  return dir / "model.json";
}

}  // namespace

TEST(Cli, HelpAndUsage) {
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"flops", "--config", "/nonexistent/config.json"}).code, kExitUsage);
}

TEST(Cli, FlopsMatchesLibrary) {
  const auto dir = fixtures::scratch("cli_flops");
  const auto c = fixtures::small_config();
  std::ofstream(dir / "c.json") << config_to_json(c).dump();
  const auto r = run({"flops", "--config", (dir / "c.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(json::parse(r.out), count_flops(c).to_json());
  auto linear = c;
  linear.linear_test_mode = true;
  const auto r2 = run({"flops", "--config", (dir / "c.json").string(), "--linear-test-mode"});
  EXPECT_EQ(json::parse(r2.out), count_flops(linear).to_json());
}

TEST(Cli, GenDataIsDeterministic) {
  const auto dir = fixtures::scratch("cli_gen");
  ASSERT_EQ(run({"gen-data", "--data", kSynth, "--out", (dir / "a.csv").string()}).code, kExitOk);
  ASSERT_EQ(run({"gen-data", "--data", kSynth, "--out", (dir / "b.csv").string()}).code, kExitOk);
  ASSERT_EQ(run({"gen-data", "--data", kSynth, "--seed", "9", "--out", (dir / "c.csv").string()}).code, kExitOk);
  const auto a = slurp(dir / "a.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b.csv"));
  EXPECT_NE(a, slurp(dir / "c.csv"));
  EXPECT_EQ(run({"gen-data", "--data", "criteo:/tmp/x.tsv", "--out", (dir / "d.csv").string()}).code, kExitConfig);
}

TEST(Cli, TrainZeroStepsEmitsNothing) {
  const auto dir = fixtures::scratch("cli_zero");
  const auto cfg = schemaless_config(dir);
  const auto r = run({"train", "--config", cfg.string(), "--data", kSynth, "--steps", "0"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST(Cli, TrainCheckpointEval) {
  const auto dir = fixtures::scratch("cli_train");
  const auto cfg = schemaless_config(dir);
  const std::string ckpt = (dir / "m.ckpt").string();
  const auto r = run({"train", "--config", cfg.string(), "--data", kSynth, "--precision", "64", "--checkpoint", ckpt,
                      "--train-options", R"({"batch_size": 50, "record_wall_time": false})"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rec = json::parse(r.out.substr(0, r.out.find('\n')));
  EXPECT_EQ(rec["examples_seen"], 200);
  const auto e = run({"eval", "--checkpoint", ckpt, "--data", kSynth});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_EQ(json::parse(e.out)["examples_seen"], 200);
}

TEST(Cli, ErrorExitCodes) {
  const auto dir = fixtures::scratch("cli_errors");
  std::ofstream(dir / "bad.json") << R"({"d": "eight"})";
  EXPECT_EQ(run({"flops", "--config", (dir / "bad.json").string()}).code, kExitConfig);
  std::ofstream(dir / "unknown.json") << R"({"depth": 3})";
  EXPECT_EQ(run({"train", "--config", (dir / "unknown.json").string(), "--data", kSynth}).code, kExitConfig);

  auto c = fixtures::small_config(4, 1);
  c.schema = FeatureSchema{};
  c.schema.categorical_features = {fixtures::major("a", 5)};
  std::ofstream(dir / "c.json") << config_to_json(c).dump();
  std::ofstream(dir / "d.csv") << "label,a\n1,2\n7,1\n";
  const auto r = run({"train", "--config", (dir / "c.json").string(), "--data", "csv:" + (dir / "d.csv").string()});
  EXPECT_EQ(r.code, kExitData) << r.err;
}

TEST(Cli, FitPrintsCoefficients) {
  const auto dir = fixtures::scratch("cli_fit");
  {
    std::ofstream f(dir / "curve.csv");
    f.precision(17);
    f << "gflop,loss\n";
    for (double x : {1.0, 2.0, 4.0, 8.0, 16.0}) f << x << ',' << 1.0 + 2.0 * std::pow(x, -0.5) << '\n';
  }
  const auto r = run({"fit", "--in", (dir / "curve.csv").string(), "--x", "gflop", "--y", "loss"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["c"].get<double>(), -0.5, 1e-6);
  EXPECT_EQ(run({"fit", "--in", (dir / "curve.csv").string(), "--x", "nope", "--y", "loss"}).code, kExitConfig);
}
