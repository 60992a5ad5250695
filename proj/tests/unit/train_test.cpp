#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "wukong/metrics.hpp"
#include "wukong/sweep.hpp"
#include "wukong/train.hpp"

using namespace wukong;

namespace {

SyntheticSpec synth(std::size_t order, std::size_t n, double noise = 0.0) {
  SyntheticSpec s;
  s.num_features = 4;
  s.cardinalities = {8};
  s.target_order = order;
  s.noise_rate = noise;
  s.num_examples = n;
  s.seed = 5;
  return s;
}

WukongConfig tiny(const SyntheticSpec& s) {
  WukongConfig c;
  c.schema = synthetic_schema(s);
  c.d = 4;
  c.l = 1;
  c.n_F = 2;
  c.n_L = 2;
  c.k = 2;
  c.fmb_mlp = {8};
  c.head_mlp = {8};
  c.seed = 1;
  return c;
}

}  // namespace

TEST(Train, ZeroStepsNoRecords) {
  auto s = synth(1, 100);
  auto m = build_model<double>(tiny(s));
  TrainOptions o;
  o.max_steps = 0;
  SyntheticStream data(s);
  Trainer<double> t(m, o);
  EXPECT_TRUE(t.train(data).empty());
  EXPECT_EQ(t.steps_taken(), 0u);
}

TEST(Train, ZeroLearningRateFreezesModel) {
  auto s = synth(2, 2000);
  auto m = build_model<double>(tiny(s));
  const auto before = m.store.entries();
  TrainOptions o;
  o.adam.lr = 0.0;
  o.adagrad.lr = 0.0;
  o.batch_size = 100;
  o.trailing_fraction = 1.0;
  SyntheticStream data(s);
  Trainer<double> t(m, o);
  auto records = t.train(data);
  ASSERT_EQ(records.size(), 1u);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(m.store.entries()[i].value, before[i].value);
  const auto frozen = evaluate(m, data);
  EXPECT_NEAR(records[0].logloss, frozen.logloss, 1e-12);
  EXPECT_EQ(records[0].examples_seen, 2000u);
}

TEST(Train, SeparableStreamReachesPerfectAuc) {
  auto s = synth(1, 20000);
  auto m = build_model<double>(tiny(s));
  TrainOptions o;
  o.batch_size = 64;  // 313 steps
  SyntheticStream data(s);
  Trainer<double> t(m, o);
  auto records = t.train(data);
  ASSERT_EQ(records.size(), 1u);
  ASSERT_TRUE(records[0].auc.has_value());
  EXPECT_EQ(*records[0].auc, 1.0);
  EXPECT_LE(t.steps_taken(), 5000u);
}

TEST(Train, EvalWindowsAndEpochRecords) {
  auto s = synth(2, 1000);
  TrainOptions o;
  o.batch_size = 100;
  o.eval_window = 300;
  {
    auto m = build_model<float>(tiny(s));
    SyntheticStream data(s);
    Trainer<float> t(m, o);
    auto r = t.train(data);
    // Windows close after 300, 600, 900 examples, then the trailing record.
    ASSERT_EQ(r.size(), 4u);
    EXPECT_EQ(r[0].examples_seen, 300u);
    EXPECT_EQ(r[2].examples_seen, 900u);
    EXPECT_EQ(r[3].examples_seen, 1000u);
  }
  {
    o.mode = TrainMode::multi_epoch;
    o.epochs = 3;
    auto m = build_model<float>(tiny(s));
    SyntheticStream data(s);
    Trainer<float> t(m, o);
    auto r = t.train(data);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[2].examples_seen, 3000u);
    EXPECT_EQ(t.steps_taken(), 30u);
  }
}

TEST(Train, MaxStepsAndEvalStream) {
  auto s = synth(2, 1000);
  auto e = s;
  e.example_seed = 99;
  e.num_examples = 300;
  auto m = build_model<double>(tiny(s));
  TrainOptions o;
  o.batch_size = 50;
  o.max_steps = 4;
  SyntheticStream data(s), eval(e);
  Trainer<double> t(m, o);
  auto r = t.train(data, &eval);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(t.steps_taken(), 4u);
  EXPECT_EQ(r[0].examples_seen, 200u);
  EXPECT_NEAR(r[0].logloss, evaluate(m, eval).logloss, 1e-12);
}

TEST(Train, BadLabelReportsExampleOffset) {
  auto s = synth(1, 10);
  auto m = build_model<double>(tiny(s));
  SyntheticStream data(s);
  ExampleBatch b = data.next(10);
  b.labels[3] = 2.0;
  TrainOptions o;
  Trainer<double> t(m, o);
  try {
    t.step(b);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("example 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("stream example 0"), std::string::npos) << msg;
  }
}

TEST(Train, IdenticalSeedsIdenticalRecords) {
  auto s = synth(2, 1500, 0.05);
  const auto run = [&] {
    auto m = build_model<float>(tiny(s));
    TrainOptions o;
    o.batch_size = 64;
    o.eval_window = 500;
    o.record_wall_time = false;
    SyntheticStream data(s);
    Trainer<float> t(m, o);
    std::ostringstream out;
    write_metrics_jsonl(out, t.train(data));
    return out.str();
  };
  const auto a = run();
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, run());
}

TEST(Warmup, LinearBelowThreshold) {
  EXPECT_EQ(warmup_scale(1, 10), 0.1);
  EXPECT_EQ(warmup_scale(5, 10), 0.5);
  EXPECT_EQ(warmup_scale(10, 10), 1.0);
  EXPECT_EQ(warmup_scale(1, 0), 1.0);
}

TEST(Warmup, EffectiveLearningRateInTrainer) {
  // Adam's first update of a scalar is lr * scale * g / (|g| + eps).
  auto s = synth(1, 1000);
  auto m = build_model<double>(tiny(s));
  TrainOptions o;
  o.mode = TrainMode::multi_epoch;  // multi-epoch warmup follows the epoch length, not max_steps
  o.batch_size = 100;               // 10 steps per epoch, warmup ceil(0.5 * 10) = 5
  o.warmup_fraction = 0.5;
  o.max_steps = 1;
  const double w0 = m.store.get("head.mlp.1.b")[0];
  SyntheticStream data(s);
  Trainer<double> t(m, o);
  t.train(data);
  EXPECT_NEAR(std::abs(m.store.get("head.mlp.1.b")[0] - w0), 1e-3 / 5.0, 1e-9);
}

TEST(MetricsRecord, JsonlFieldOrderAndNullAuc) {
  MetricsRecord r;
  r.examples_seen = 10;
  r.logloss = 0.5;
  r.gflop_per_example = 1e-6;
  r.params_total = 42;
  EXPECT_EQ(metrics_jsonl_line(r),
            R"({"examples_seen":10,"logloss":0.5,"auc":null,"gflop_per_example":1e-06,"params_total":42,"wall_seconds":0.0})");
  auto back = MetricsRecord::from_json(json::parse(metrics_jsonl_line(r)));
  EXPECT_FALSE(back.auc.has_value());
  EXPECT_EQ(back.params_total, 42u);
}

TEST(TrainOptions, JsonRoundTripAndValidation) {
  TrainOptions o;
  o.mode = TrainMode::multi_epoch;
  o.epochs = 3;
  o.max_steps = 17;
  auto back = train_options_from_json(train_options_to_json(o));
  EXPECT_EQ(back.epochs, 3u);
  EXPECT_EQ(*back.max_steps, 17u);
  EXPECT_THROW(train_options_from_json(json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(train_options_from_json(json{{"beta2", 1.0}}), ConfigError);
  EXPECT_THROW(train_options_from_json(json{{"mode", "forever"}}), ConfigError);
}

TEST(SyntheticBayesBound, ModelNeverBeatsLabelNoise) {
  auto s = synth(2, 6000, 0.1);
  auto m = build_model<double>(tiny(s));
  TrainOptions o;
  o.batch_size = 64;
  o.mode = TrainMode::multi_epoch;
  o.epochs = 2;
  SyntheticStream data(s);
  Trainer<double> t(m, o);
  t.train(data);
  auto e = s;
  e.example_seed = 123;
  e.num_examples = 20000;
  SyntheticStream held_out(e);
  EXPECT_GE(evaluate(m, held_out).logloss, binary_entropy(0.1) - 0.01);
}
