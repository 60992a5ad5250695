#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "wukong/flops.hpp"
#include "wukong/model.hpp"

using namespace wukong;

namespace {

// Ten single-embedding features, no dense inputs: n = 10 at layer 0.
WukongConfig ten_features(std::size_t d, std::size_t k) {
  WukongConfig c;
  for (int i = 0; i < 10; ++i) c.schema.categorical_features.push_back(fixtures::major("c" + std::to_string(i), 4));
  c.d = d;
  c.k = k;
  c.l = 1;
  c.n_F = 2;
  c.n_L = 2;
  return c;
}

FlopReport measured(const WukongConfig& c, std::size_t batch_size) {
  auto m = build_model<double>(c);
  ExampleBatch b = ExampleBatch::empty_for(c.schema);
  Rng rng(1, "flops_test");
  for (std::size_t e = 0; e < batch_size; ++e) {
    for (std::size_t f = 0; f < c.schema.categorical_features.size(); ++f) {
      const auto& feat = c.schema.categorical_features[f];
      std::vector<std::uint64_t> ids(feat.hotness);
      for (auto& id : ids) id = rng.below(feat.cardinality);
      b.categorical[f].push(ids);
    }
    for (std::size_t j = 0; j < c.schema.num_dense(); ++j) b.dense.push_back(rng.uniform(-1, 1));
    b.labels.push_back(1.0);
  }
  Graph<double> g;
  forward(g, m, b);
  FlopReport r = instrumented_flops(g, batch_size);
  // Parameter counts from the allocated store.
  r.params_dense = m.store.numel(false);
  r.params_sparse = m.store.numel(true);
  r.params_total = r.params_dense + r.params_sparse;
  return r;
}

}  // namespace

TEST(CountFlops, LowrankHandCount) {
  auto c = ten_features(4, 3);
  EXPECT_EQ(count_flops(c).fm, 480u);
  EXPECT_EQ(measured(c, 3).fm, 480u);
}

TEST(CountFlops, DoublingKDoublesFm) {
  auto c = ten_features(4, 3);
  c.l = 3;
  const auto base = count_flops(c).fm;
  c.k = 6;
  EXPECT_EQ(count_flops(c).fm, 2 * base);
}

TEST(CountFlops, EmptyStackHasNoInteractionCost) {
  auto c = fixtures::small_config(8, 0);
  auto r = count_flops(c);
  EXPECT_EQ(r.fm, 0u);
  EXPECT_EQ(r.fmb_mlp, 0u);
  EXPECT_EQ(r.lcb, 0u);
  EXPECT_EQ(r.residual, 0u);
  EXPECT_EQ(r.ln, 0u);
  EXPECT_GT(r.head, 0u);
}

TEST(CountFlops, MatchesInstrumentationOnMixedSchema) {
  for (FmVariant v : {FmVariant::basic, FmVariant::lowrank, FmVariant::lowrank_attentive}) {
    auto c = fixtures::small_config();
    c.fm_variant = v;
    c.schema.categorical_features[1].hotness = 3;
    c.schema.categorical_features[3].hotness = 2;
    EXPECT_EQ(count_flops(c), measured(c, 4)) << fm_variant_name(v);
  }
}

TEST(CountFlops, AffineInLayers) {
  auto c = fixtures::small_config();
  c.n_F = 4;
  c.n_L = 2;  // n_F + n_L == n0, so every layer has the same shape
  std::vector<std::uint64_t> totals;
  for (std::size_t l = 1; l <= 4; ++l) {
    c.l = l;
    totals.push_back(count_flops(c).total);
  }
  for (std::size_t i = 2; i < totals.size(); ++i) EXPECT_EQ(totals[i] - totals[i - 1], totals[1] - totals[0]);
}

TEST(CountFlops, FmbMlpQuadraticInWidth) {
  auto c = fixtures::small_config();
  c.fmb_mlp = {16, 16};
  const auto base = [&](std::size_t h) {
    c.fmb_mlp = {h, h};
    return count_flops(c).fmb_mlp;
  };
  // f(h) = l * (2 h^2 + (2 in + 2 out + 2) h + out) with biases; the second
  // difference isolates the 2 l h^2 term.
  const auto f1 = base(8), f2 = base(16), f3 = base(24);
  EXPECT_EQ((f3 - f2) - (f2 - f1), c.l * 2u * 2u * 8u * 8u);
}

TEST(CountParams, LcbAndTables) {
  auto c = fixtures::small_config();
  const auto layout = parameter_layout(c);
  for (const auto& e : layout) {
    if (e.name == "layer.0.lcb.w") EXPECT_EQ(e.shape, (Shape{2, 6}));
    if (e.name == "layer.1.lcb.w") EXPECT_EQ(e.shape, (Shape{2, 5}));
    if (e.name == "emb.b") EXPECT_EQ(shape_numel(e.shape), 7u * 16u);
  }
}

TEST(CountParams, HandSummedSmallConfig) {
  auto c = fixtures::small_config();
  c.fm_variant = FmVariant::lowrank;
  // Tables: a 5x8, b 7x16, c 4x8, m1 6x3, m2 3x2.
  const std::uint64_t sparse = 40 + 112 + 32 + 18 + 6;
  // Minor MLP 5->5->8, dense MLP 2->4->8.
  std::uint64_t dense = (5 * 5 + 5) + (5 * 8 + 8) + (2 * 4 + 4) + (4 * 8 + 8);
  // Layer 0 (n_in 6) and layer 1 (n_in 5), k 4, n_F 3, n_L 2, fmb hidden 12.
  for (std::uint64_t n : {6, 5}) {
    dense += n * 4;                                // Y
    dense += 2 * n * 4;                            // FMB LN
    dense += (n * 4 * 12 + 12) + (12 * 24 + 24);   // FMB MLP
    dense += 2 * n;                                // LCB
    if (n != 5) dense += 5 * n;                    // residual projection
    dense += 2 * 5 * 8;                            // output LN
  }
  dense += (40 * 10 + 10) + (10 + 1);  // head 40->10->1
  const auto p = count_params(c);
  EXPECT_EQ(p.sparse, sparse);
  EXPECT_EQ(p.dense, dense);
  EXPECT_EQ(p.total, sparse + dense);
  auto m = build_model<double>(c);
  EXPECT_EQ(m.store.numel(true), sparse);
  EXPECT_EQ(m.store.numel(false), dense);
}
