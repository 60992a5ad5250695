#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "wukong/optim.hpp"

using namespace wukong;

namespace {

GradientMap<double> dense_grad(const std::string& name, Tensor<double> g) {
  GradientMap<double> m;
  typename GradientMap<double>::Entry e;
  e.name = name;
  e.shape = g.shape();
  e.dense = std::move(g);
  m.add_entry(std::move(e));
  return m;
}

GradientMap<double> row_grad(const std::string& name, Shape shape, std::vector<std::size_t> rows,
                             std::vector<double> values) {
  GradientMap<double> m;
  typename GradientMap<double>::Entry e;
  e.name = name;
  e.sparse = true;
  e.shape = shape;
  e.rows.rows = std::move(rows);
  e.rows.width = shape[1];
  e.rows.values = std::move(values);
  m.add_entry(std::move(e));
  return m;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParamsButCountsStep) {
  ParamStore<double> store;
  store.add("w", Tensor<double>({3}, {1, 2, 3}));
  Optimizer<double> opt(store, {}, {});
  opt.step(store, dense_grad("w", Tensor<double>({3})));
  EXPECT_EQ(store.get("w").storage(), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(opt.state().step, 1u);
}

TEST(Adam, ScalarTraceMatchesHandComputation) {
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const std::vector<double> gs{0.5, -0.2, 0.3, 0.3, -1.0};
  ParamStore<double> store;
  store.add("w", Tensor<double>({1}, {0.25}));
  Optimizer<double> opt(store, AdamConfig{lr, b1, b2, eps}, {});
  double w = 0.25, m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= gs.size(); ++t) {
    opt.step(store, dense_grad("w", Tensor<double>({1}, {gs[t - 1]})));
    m = b1 * m + (1 - b1) * gs[t - 1];
    v = b2 * v + (1 - b2) * gs[t - 1] * gs[t - 1];
    w -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    EXPECT_NEAR(store.get("w")[0], w, 1e-15) << "step " << t;
  }
  // The first step of Adam moves by almost exactly lr * sign(g).
  ParamStore<double> s2;
  s2.add("w", Tensor<double>({1}, {0.0}));
  Optimizer<double> o2(s2, {}, {});
  o2.step(s2, dense_grad("w", Tensor<double>({1}, {4.0})));
  EXPECT_NEAR(s2.get("w")[0], -1e-3, 1e-11);
}

TEST(Adam, BetaTwoOfOneRejected) {
  AdamConfig c;
  c.beta2 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  ParamStore<double> store;
  EXPECT_THROW(Optimizer<double>(store, c, {}), ConfigError);
}

TEST(Adam, NanGradientAbortsAndNamesParameter) {
  ParamStore<double> store;
  store.add("layer.0.lcb.w", Tensor<double>({2}, {1, 1}));
  Optimizer<double> opt(store, {}, {});
  try {
    opt.step(store, dense_grad("layer.0.lcb.w", Tensor<double>({2}, {0.1, std::nan("")})));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.0.lcb.w"), std::string::npos);
  }
  EXPECT_EQ(store.get("layer.0.lcb.w").storage(), (std::vector<double>{1, 1}));
  EXPECT_EQ(opt.state().step, 0u);
}

TEST(Adam, IdenticalRunsIdenticalTrajectories) {
  const auto run = [] {
    ParamStore<double> store;
    store.add("w", Tensor<double>({2}, {0.3, -0.7}));
    Optimizer<double> opt(store, {}, {});
    for (int i = 0; i < 10; ++i) {
      const auto& w = store.get("w");
      opt.step(store, dense_grad("w", Tensor<double>({2}, {2 * w[0], std::sin(w[1])})));
    }
    return store.get("w");
  };
  EXPECT_EQ(run(), run());
}

TEST(RowwiseAdagrad, UntouchedRowsBitIdentical) {
  ParamStore<double> store;
  store.add("emb", Tensor<double>({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8}), true);
  Optimizer<double> opt(store, {}, {});
  opt.step(store, row_grad("emb", {4, 2}, {1, 3}, {0.5, 0.5, -1, 2}));
  const auto& t = store.get("emb");
  EXPECT_EQ(t.at(0, 0), 1.0);
  EXPECT_EQ(t.at(0, 1), 2.0);
  EXPECT_EQ(t.at(2, 0), 5.0);
  EXPECT_EQ(t.at(2, 1), 6.0);
  EXPECT_NE(t.at(1, 0), 3.0);
}

TEST(RowwiseAdagrad, UnitGradientMovesByLr) {
  Tensor<double> table({2, 3}, {0, 0, 0, 0, 0, 0});
  std::vector<double> acc;
  RowGrad<double> g{{0}, 3, {1, 1, 1}};
  rowwise_adagrad_update(table, g, acc, 0.1, 0.0);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(table.at(0, j), -0.1);
  EXPECT_EQ(acc[1], 0.0);
}

TEST(RowwiseAdagrad, MultiStepScalarTrace) {
  const double lr = 0.1, eps = 1e-8;
  const std::vector<std::vector<double>> grads{{1.0, -2.0}, {0.5, 0.5}, {-3.0, 1.0}};
  Tensor<double> table({1, 2}, {0.2, -0.4});
  std::vector<double> acc;
  double r0 = 0.2, r1 = -0.4, a = 0.0;
  for (const auto& g : grads) {
    rowwise_adagrad_update(table, RowGrad<double>{{0}, 2, g}, acc, lr, eps);
    a += (g[0] * g[0] + g[1] * g[1]) / 2.0;
    r0 -= lr * g[0] / std::sqrt(a + eps);
    r1 -= lr * g[1] / std::sqrt(a + eps);
    EXPECT_NEAR(table.at(0, 0), r0, 1e-15);
    EXPECT_NEAR(table.at(0, 1), r1, 1e-15);
  }
}

TEST(Optimizer, GlobalNormClipScalesBothKinds) {
  ParamStore<double> store;
  store.add("w", Tensor<double>({1}, {0.0}));
  Optimizer<double> opt(store, AdamConfig{}, AdagradConfig{});
  GradientMap<double> g = dense_grad("w", Tensor<double>({1}, {3.0}));
  EXPECT_DOUBLE_EQ(gradient_norm(g), 3.0);
  opt.step(store, g, 1.0, 1.0);
  EXPECT_NEAR(store.get("w")[0], -1e-3, 1e-11);  // Adam is scale-invariant on the first step
}
