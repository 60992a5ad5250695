#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "wukong/interaction.hpp"
#include "wukong/model.hpp"

using namespace wukong;

namespace {

Tensor<double> random_tensor(Shape s, std::uint64_t seed) {
  Tensor<double> t(std::move(s));
  Rng rng(seed, "interaction_test");
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

oracle::Mat slice(const Tensor<double>& x, std::size_t b) {
  oracle::Mat m = oracle::zeros(x.dim(1), x.dim(2));
  for (std::size_t i = 0; i < x.dim(1); ++i)
    for (std::size_t j = 0; j < x.dim(2); ++j) m[i][j] = x.at(b, i, j);
  return m;
}

void expect_near(const Tensor<double>& got, std::size_t b, const oracle::Mat& want, double tol) {
  for (std::size_t i = 0; i < want.size(); ++i)
    for (std::size_t j = 0; j < want[i].size(); ++j) EXPECT_NEAR(got.at(b, i, j), want[i][j], tol);
}

WukongConfig layer_config(FmVariant v, std::size_t n_L = 2) {
  WukongConfig c = fixtures::small_config();
  c.fm_variant = v;
  c.n_L = n_L;
  return c;
}

}  // namespace

TEST(FmBasic, OrthonormalRowsGiveIdentity) {
  auto x = Tensor<double>::identity(4).reshaped({1, 4, 4});
  EXPECT_EQ(fm_basic(x), x);
}

TEST(FmBasic, ZerosGiveZeros) { EXPECT_EQ(fm_basic(Tensor<double>({2, 3, 2})), Tensor<double>({2, 3, 3})); }

TEST(FmBasic, MatchesPairwiseDots) {
  auto x = random_tensor({1, 5, 3}, 1);
  auto f = fm_basic(x);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < 3; ++t) dot += x.at(0, i, t) * x.at(0, j, t);
      EXPECT_NEAR(f.at(0, i, j), dot, 1e-12);
    }
}

TEST(FmBasic, RejectsRank2) { EXPECT_THROW(fm_basic(Tensor<double>({3, 3})), ConfigError); }

TEST(FmLowrank, IdentityProjectionEqualsBasic) {
  auto x = random_tensor({2, 4, 3}, 2);
  auto a = fm_lowrank(x, Tensor<double>::identity(4));
  auto b = fm_basic(x);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(FmLowrank, ZerosGiveZeros) {
  EXPECT_EQ(fm_lowrank(Tensor<double>({1, 4, 3}), random_tensor({4, 2}, 3)), Tensor<double>({1, 4, 2}));
}

TEST(FmLowrank, ProjectionShapeMismatch) {
  EXPECT_THROW(fm_lowrank(Tensor<double>({1, 4, 3}), Tensor<double>({5, 2})), ConfigError);
}

TEST(FmAttentive, ZeroAttentionEqualsStatic) {
  WukongConfig c = layer_config(FmVariant::lowrank_attentive);
  auto m = build_model<double>(c);
  const LayerParams p = layer_params(c, 0);
  for (auto& e : m.store.entries())
    if (e.name.rfind(p.prefix() + ".fm.attn", 0) == 0) e.value.fill(0.0);
  auto x = random_tensor({3, p.n_in, c.d}, 4);
  Graph<double> g;
  Var y = g.parameter(p.y_name(), m.store.get(p.y_name()));
  Var wa = g.parameter(p.wa_name(), m.store.get(p.wa_name()));
  auto att = g.value(fm_lowrank_attentive(g, m.store, g.input(x), y, wa, p.attn_mlp, false));
  auto stat = fm_lowrank(x, m.store.get(p.y_name()));
  for (std::size_t i = 0; i < att.numel(); ++i) EXPECT_NEAR(att[i], stat[i], 1e-12);
}

TEST(FmAttentive, ZerosGiveZeros) {
  WukongConfig c = layer_config(FmVariant::lowrank_attentive);
  auto m = build_model<double>(c);
  const LayerParams p = layer_params(c, 0);
  Graph<double> g;
  Var y = g.parameter(p.y_name(), m.store.get(p.y_name()));
  Var wa = g.parameter(p.wa_name(), m.store.get(p.wa_name()));
  auto out = g.value(fm_lowrank_attentive(g, m.store, g.input(Tensor<double>({2, p.n_in, c.d})), y, wa, p.attn_mlp, false));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(FmAttentive, MatchesStepByStepOracle) {
  WukongConfig c = layer_config(FmVariant::lowrank_attentive);
  auto m = build_model<double>(c);
  const LayerParams p = layer_params(c, 0);
  for (auto& e : m.store.entries())
    if (e.name.rfind(p.prefix() + ".fm.attn", 0) == 0 && e.name.back() == 'b') e.value.fill(0.05);
  auto x = random_tensor({3, p.n_in, c.d}, 5);
  Graph<double> g;
  Var y = g.parameter(p.y_name(), m.store.get(p.y_name()));
  Var wa = g.parameter(p.wa_name(), m.store.get(p.wa_name()));
  auto out = g.value(fm_lowrank_attentive(g, m.store, g.input(x), y, wa, p.attn_mlp, false));
  for (std::size_t b = 0; b < 3; ++b) {
    const auto xb = slice(x, b);
    const auto compressed = oracle::matmul(oracle::to_mat(m.store.get(p.wa_name())), xb);
    const auto att = oracle::mlp(m.store, p.prefix() + ".fm.attn", 2, oracle::flatten(compressed), false);
    auto y_eff = oracle::to_mat(m.store.get(p.y_name()));
    for (std::size_t i = 0; i < p.n_in; ++i)
      for (std::size_t j = 0; j < c.k; ++j) y_eff[i][j] += att[i * c.k + j];
    expect_near(out, b, oracle::matmul(oracle::matmul(xb, oracle::transpose(xb)), y_eff), 1e-10);
  }
}

TEST(FmAttentive, WidthMismatch) {
  WukongConfig c = layer_config(FmVariant::lowrank_attentive);
  auto m = build_model<double>(c);
  LayerParams p = layer_params(c, 0);
  p.attn_mlp.widths.back() += 1;
  Graph<double> g;
  Var y = g.parameter(p.y_name(), m.store.get(p.y_name()));
  Var wa = g.parameter(p.wa_name(), m.store.get(p.wa_name()));
  EXPECT_THROW(fm_lowrank_attentive(g, m.store, g.input(Tensor<double>({1, p.n_in, c.d})), y, wa, p.attn_mlp, false),
               ConfigError);
}

TEST(Fmb, ZeroInputGivesZero) {
  WukongConfig c = layer_config(FmVariant::lowrank);
  auto m = build_model<double>(c);
  const LayerParams p = layer_params(c, 0);
  Graph<double> g;
  auto out = g.value(fmb_forward(g, m.store, p, g.input(Tensor<double>({2, p.n_in, c.d})), false, 1e-5));
  EXPECT_EQ(out.shape(), (Shape{2, c.n_F, c.d}));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Fmb, MatchesComposedStages) {
  for (FmVariant v : {FmVariant::basic, FmVariant::lowrank}) {
    WukongConfig c = layer_config(v);
    auto m = build_model<double>(c);
    const LayerParams p = layer_params(c, 0);
    auto x = random_tensor({2, p.n_in, c.d}, 6);
    Graph<double> g;
    auto out = g.value(fmb_forward(g, m.store, p, g.input(x), false, 1e-5));
    for (std::size_t b = 0; b < 2; ++b) {
      auto fm = v == FmVariant::basic ? fm_basic(x) : fm_lowrank(x, m.store.get(p.y_name()));
      std::vector<double> flat(fm.data() + b * p.fm_width(), fm.data() + (b + 1) * p.fm_width());
      auto normed = oracle::layer_norm(flat, oracle::to_vec(m.store.get(p.fmb_ln_gain())),
                                       oracle::to_vec(m.store.get(p.fmb_ln_bias())), 1e-5);
      auto h = oracle::mlp(m.store, p.prefix() + ".fmb.mlp", 2, normed, false);
      expect_near(out, b, oracle::unflatten(h, c.n_F), 1e-12);
    }
  }
}

TEST(Lcb, IdentityKeepsInput) {
  auto x = random_tensor({2, 4, 3}, 7);
  Graph<double> g;
  Tensor<double> w = Tensor<double>::identity(4);
  EXPECT_EQ(g.value(lcb_forward(g, g.input(x), g.input(w))), x);
}

TEST(Lcb, OneHotRowsGather) {
  auto x = random_tensor({1, 4, 3}, 8);
  Tensor<double> w({2, 4}, {0, 0, 1, 0, 1, 0, 0, 0});
  Graph<double> g;
  auto out = g.value(lcb_forward(g, g.input(x), g.input(w)));
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(out.at(0, 0, j), x.at(0, 2, j));
    EXPECT_EQ(out.at(0, 1, j), x.at(0, 0, j));
  }
}

TEST(Lcb, MatchesMatmulOracle) {
  auto x = random_tensor({2, 5, 3}, 9);
  auto w = random_tensor({4, 5}, 10);
  Graph<double> g;
  auto out = g.value(lcb_forward(g, g.input(x), g.input(w)));
  for (std::size_t b = 0; b < 2; ++b) expect_near(out, b, oracle::matmul(oracle::to_mat(w), slice(x, b)), 1e-12);
  Graph<double> g2;
  EXPECT_THROW(lcb_forward(g2, g2.input(x), g2.input(Tensor<double>({4, 3}))), ConfigError);
}

TEST(Layer, MatchesComposedOracle) {
  for (FmVariant v : {FmVariant::basic, FmVariant::lowrank, FmVariant::lowrank_attentive}) {
    for (std::size_t n_L : {0u, 2u, 3u}) {  // n_L = 3: n_F + n_L == n0, identity residual
      WukongConfig c = layer_config(v, n_L);
      auto m = build_model<double>(c);
      for (std::size_t i = 0; i < c.l; ++i) {
        const LayerParams p = layer_params(c, i);
        auto x = random_tensor({2, p.n_in, c.d}, 11 + i);
        Graph<double> g;
        auto out = g.value(layer_forward(g, m.store, p, g.input(x), false, 1e-5, c.ablate));
        ASSERT_EQ(out.shape(), (Shape{2, c.n_F + n_L, c.d}));
        for (std::size_t b = 0; b < 2; ++b) expect_near(out, b, oracle::layer(m, i, slice(x, b)), 1e-12);
      }
    }
  }
}

TEST(Layer, MissingResidualProjection) {
  WukongConfig c = layer_config(FmVariant::lowrank);
  auto m = build_model<double>(c);
  const LayerParams p = layer_params(c, 0);
  ASSERT_TRUE(p.needs_residual_projection());
  ParamStore<double> pruned;
  for (const auto& e : m.store.entries())
    if (e.name != p.residual_name()) pruned.add(e.name, e.value, e.sparse);
  Graph<double> g;
  EXPECT_THROW(layer_forward(g, pruned, p, g.input(random_tensor({1, p.n_in, c.d}, 12)), false, 1e-5, c.ablate),
               ConfigError);
}

TEST(Layer, AblationsStayWellFormed) {
  WukongConfig c = layer_config(FmVariant::lowrank);
  for (Ablation a : {Ablation{true, false, false}, Ablation{false, true, false}, Ablation{false, false, true},
                     Ablation{true, true, false}}) {
    c.ablate = a;
    auto m = build_model<double>(c);
    const LayerParams p = layer_params(c, 0);
    auto x = random_tensor({2, p.n_in, c.d}, 13);
    Graph<double> g;
    auto out = g.value(layer_forward(g, m.store, p, g.input(x), false, 1e-5, a));
    EXPECT_EQ(out.shape(), (Shape{2, p.n_out(), c.d}));
    EXPECT_TRUE(out.all_finite());
    for (std::size_t b = 0; b < 2; ++b) expect_near(out, b, oracle::layer(m, 0, slice(x, b)), 1e-12);
  }
}

TEST(Stack, EmptyStackIsIdentity) {
  WukongConfig c = fixtures::small_config(8, 0);
  auto m = build_model<double>(c);
  auto x = random_tensor({2, 6, 8}, 14);
  Graph<double> g;
  EXPECT_EQ(g.value(stack_forward(g, m.store, c, g.input(x))), x);
}

TEST(Stack, OneLayerShape) {
  WukongConfig c = fixtures::small_config(8, 1);
  auto m = build_model<double>(c);
  Graph<double> g;
  auto out = g.value(stack_forward(g, m.store, c, g.input(random_tensor({3, 6, 8}, 15))));
  EXPECT_EQ(out.shape(), (Shape{3, 5, 8}));
}
