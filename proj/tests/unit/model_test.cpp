#include <gtest/gtest.h>

#include <limits>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "wukong/model.hpp"

using namespace wukong;

TEST(BuildModel, SameSeedSameRegistry) {
  auto a = build_model<double>(fixtures::small_config());
  auto b = build_model<double>(fixtures::small_config());
  ASSERT_EQ(a.store.size(), b.store.size());
  for (std::size_t i = 0; i < a.store.size(); ++i) {
    EXPECT_EQ(a.store.entries()[i].name, b.store.entries()[i].name);
    EXPECT_EQ(a.store.entries()[i].value, b.store.entries()[i].value);
  }
  auto c = fixtures::small_config();
  c.seed = 12;
  auto d = build_model<double>(c);
  EXPECT_NE(a.store.get("layer.0.lcb.w"), d.store.get("layer.0.lcb.w"));
}

TEST(BuildModel, EmptyStackFeedsHeadWithX0) {
  auto m = build_model<double>(fixtures::small_config(8, 0));
  EXPECT_EQ(m.store.get("head.mlp.0.w").dim(0), 6u * 8u);
  EXPECT_FALSE(m.store.contains("layer.0.lcb.w"));
}

TEST(BuildModel, InitializationRanges) {
  auto m = build_model<double>(fixtures::small_config());
  for (const auto& e : m.store.entries()) {
    if (!e.sparse && (e.name.ends_with(".b") || e.name.ends_with("ln.bias"))) {
      for (double v : e.value.values()) EXPECT_EQ(v, 0.0) << e.name;
    } else if (e.name.ends_with("ln.gain")) {
      for (double v : e.value.values()) EXPECT_EQ(v, 1.0) << e.name;
    } else {
      const double bound = e.sparse ? 1.0 / std::sqrt(8.0) : 1.0 / std::sqrt(static_cast<double>(e.value.dim(0)));
      const bool y_like = e.name.ends_with(".fm.y") || e.name.ends_with(".fm.wa") || e.name.ends_with(".lcb.w") ||
                          e.name.ends_with(".res.w");
      const double b = y_like ? 1.0 / std::sqrt(static_cast<double>(e.name.ends_with(".fm.y") ? e.value.dim(0)
                                                                                               : e.value.dim(1)))
                              : bound;
      for (double v : e.value.values()) EXPECT_LE(std::abs(v), b) << e.name;
    }
  }
}

TEST(BuildModel, InconsistentWidthsNamed) {
  auto c = fixtures::small_config();
  c.d = 0;
  EXPECT_THROW(build_model<double>(c), ConfigError);
  auto m = build_model<double>(fixtures::small_config());
  m.store.get("layer.1.lcb.w") = Tensor<double>({2, 4});
  try {
    check_layout(m);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.1.lcb.w"), std::string::npos) << e.what();
  }
}

TEST(BuildModel, CriteoPresetBuilds) {
  auto c = load_config(std::filesystem::path(WUKONG_TEST_DATA) / ".." / ".." / "presets" / "criteo.json");
  EXPECT_EQ(c.schema.categorical_features.size(), 26u);
  EXPECT_EQ(c.schema.num_dense(), 13u);
  EXPECT_NO_THROW(parameter_layout(c));
}

TEST(Forward, ZeroParametersGiveZeroLogits) {
  auto m = build_model<double>(fixtures::small_config());
  for (auto& e : m.store.entries()) e.value.fill(0.0);
  auto z = predict_logits(m, fixtures::random_batch(m.config.schema, 4, 1));
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, BatchOfOneMatchesBatch) {
  auto m = build_model<double>(fixtures::small_config());
  auto batch = fixtures::random_batch(m.config.schema, 6, 2);
  auto all = predict_logits(m, batch);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(predict_logits(m, batch.slice(i, i + 1))[0], all[i]);
}

TEST(Forward, MatchesStraightLineOracle) {
  for (FmVariant v : {FmVariant::basic, FmVariant::lowrank, FmVariant::lowrank_attentive}) {
    for (bool lin : {false, true}) {
      auto c = fixtures::small_config();
      c.fm_variant = v;
      c.linear_test_mode = lin;
      auto m = build_model<double>(c);
      // Nonzero biases and affine terms so every parameter enters the output.
      Rng rng(3, "model_test");
      for (auto& e : m.store.entries())
        if (e.name.ends_with(".b") || e.name.find(".ln.") != std::string::npos)
          for (auto& x : e.value.values()) x += rng.uniform(-0.2, 0.2);
      auto batch = fixtures::random_batch(c.schema, 5, 4);
      auto z = predict_logits(m, batch);
      auto ref = oracle::logits(m, batch);
      for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(z[i], ref[i], 1e-10) << fm_variant_name(v) << " " << lin;
    }
  }
}

TEST(Forward, NonFiniteReportsLayer) {
  auto m = build_model<double>(fixtures::small_config());
  m.store.get("layer.1.lcb.w")[0] = std::numeric_limits<double>::infinity();
  try {
    predict_logits(m, fixtures::random_batch(m.config.schema, 2, 5, 1));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(Forward, EveryParameterGetsAGradient) {
  auto m = build_model<double>(fixtures::small_config());
  Graph<double> g;
  auto batch = fixtures::random_batch(m.config.schema, 3, 6);
  Var z = forward(g, m, batch);
  auto grads = g.backward(g.bce_logits(z, Tensor<double>({3}, batch.labels)));
  EXPECT_EQ(grads.entries().size(), m.store.size());
  for (const auto& e : m.store.entries()) EXPECT_TRUE(grads.contains(e.name)) << e.name;
}
