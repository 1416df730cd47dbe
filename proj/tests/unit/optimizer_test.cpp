#include <cmath>

#include <gtest/gtest.h>

#include "da3d/errors.hpp"
#include "da3d/optimizer.hpp"

namespace da3d {
namespace {

const ModelDims kDims{3, 2, 4, 2, 2};

TEST(Adam, ZeroGradientIsNoOp) {
  const auto start = ModelParams<double>::glorot(kDims, 1);
  auto p = start;
  auto state = AdamState<double>::zeros(kDims);
  const auto zero = ModelParams<double>::zeros(kDims);
  for (int i = 0; i < 5; ++i) adam_step(p, zero, state, OptimizerHyper{}, 1e-3);
  EXPECT_EQ(p, start);
  EXPECT_EQ(state.step, 5);
  EXPECT_EQ(state.m, zero);
}

TEST(Adam, ZeroGradientOnlyDecaysMoments) {
  auto p = ModelParams<double>::glorot(kDims, 1);
  auto state = AdamState<double>::zeros(kDims);
  auto g = ModelParams<double>::zeros(kDims);
  g.clf_b << 1.0, -2.0;
  adam_step(p, g, state, OptimizerHyper{}, 1e-3);
  const auto m1 = state.m.clf_b;
  const auto v1 = state.v.clf_b;
  const auto before = p;
  adam_step(p, ModelParams<double>::zeros(kDims), state, OptimizerHyper{}, 1e-3);
  EXPECT_LE((state.m.clf_b - 0.9 * m1).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((state.v.clf_b - 0.999 * v1).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(p.att_w1, before.att_w1);
}

TEST(Adam, FirstStepClosedForm) {
  const double lr = 1e-4;
  auto p = ModelParams<double>::zeros(kDims);
  auto g = ModelParams<double>::zeros(kDims);
  g.clf_b[0] = 1.0;
  auto state = AdamState<double>::zeros(kDims);
  adam_step(p, g, state, OptimizerHyper{}, lr);
  // m_hat = 1, v_hat = 1, so the step is -lr / (1 + eps).
  EXPECT_NEAR(p.clf_b[0], -lr / (1.0 + 1e-8), 1e-18);
  EXPECT_LT(p.clf_b[0], 0.0);
  EXPECT_EQ(p.clf_b[1], 0.0);
}

TEST(Adam, ScalarsUpdateIndependently) {
  auto g = ModelParams<double>::zeros(kDims);
  g.clf_b << 0.5, -3.0;
  auto both = ModelParams<double>::zeros(kDims);
  auto s = AdamState<double>::zeros(kDims);
  for (int i = 0; i < 10; ++i) adam_step(both, g, s, OptimizerHyper{}, 1e-2);

  auto only_first = ModelParams<double>::zeros(kDims);
  auto g1 = g;
  g1.clf_b[1] = 0.0;
  auto s1 = AdamState<double>::zeros(kDims);
  for (int i = 0; i < 10; ++i) adam_step(only_first, g1, s1, OptimizerHyper{}, 1e-2);

  EXPECT_EQ(both.clf_b[0], only_first.clf_b[0]);
  EXPECT_GT(both.clf_b[1], 0.0);
}

TEST(Adam, NonFiniteGradientThrows) {
  auto p = ModelParams<float>::glorot(kDims, 2);
  auto g = ModelParams<float>::zeros(kDims);
  g.head_w2(0, 0) = std::numeric_limits<float>::quiet_NaN();
  auto s = AdamState<float>::zeros(kDims);
  EXPECT_THROW(adam_step(p, g, s, OptimizerHyper{}, 1e-3), DivergenceError);
  g.head_w2(0, 0) = std::numeric_limits<float>::infinity();
  EXPECT_THROW(sgd_step(p, g, OptimizerHyper{}, 1e-3), DivergenceError);
}

TEST(Sgd, StepAndWeightDecay) {
  auto p = ModelParams<double>::zeros(kDims);
  p.clf_b << 1.0, 2.0;
  auto g = ModelParams<double>::zeros(kDims);
  g.clf_b << 0.5, 0.0;
  OptimizerHyper h;
  h.kind = OptimizerKind::Sgd;
  h.weight_decay = 0.1;
  sgd_step(p, g, h, 0.1);
  EXPECT_NEAR(p.clf_b[0], 1.0 - 0.1 * (0.5 + 0.1), 1e-15);
  EXPECT_NEAR(p.clf_b[1], 2.0 - 0.1 * 0.2, 1e-15);
}

}  // namespace
}  // namespace da3d
