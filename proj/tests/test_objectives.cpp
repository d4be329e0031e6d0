// Copyright 2026 The fmlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fmlab/errors.hpp"
#include "fmlab/objectives.hpp"
#include "test_util.hpp"

namespace fmlab {
namespace {

using testing::max_abs_diff;
using testing::random_net;
using testing::rel_err;
using testing::small_arch;

Tensor row_tensor(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({1, n}, std::move(v));
}

TEST(AdaptiveDistance, ZeroOnEqualInputs) {
  Rng rng(1);
  const Tensor a = rng.normal_tensor(8, 3);
  EXPECT_EQ(AdaptiveDistance{}(a, a), 0.0);
}

TEST(AdaptiveDistance, ScalarExample) {
  const AdaptiveDistance d{0.5, 1.0};
  const Tensor a = row_tensor({1.0, 1.0, 1.0}), b = row_tensor({0.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(d(a, b), 1.5);
}

TEST(AdaptiveDistance, NonNegativeAndMonotone) {
  const AdaptiveDistance d{};
  double prev = 0.0;
  for (int i = 1; i <= 200; ++i) {
    const double v = d.row(0.01 * i * i);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(AdaptiveDistance, PseudoHuberIsAsymptoticallyLinear) {
  const AdaptiveDistance d{0.5, 1e-3};
  const double a = 1e3;
  EXPECT_LT(std::abs(d.row(a * a) - a) / a, 1e-6);
}

TEST(AdaptiveDistance, PEqualsOneIsSquaredError) {
  const AdaptiveDistance d{1.0, 1e-3};
  EXPECT_DOUBLE_EQ(d.row(7.0), 7.0);
}

// The gradient holds the denominator fixed; the oracle differentiates
// ||a - b||^2 / D with D frozen at the base point.
TEST(AdaptiveDistance, GradientMatchesFrozenDenominatorDifferences) {
  const AdaptiveDistance d{0.5, 0.3};
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = rng.normal_tensor(4, 3), b = rng.normal_tensor(4, 3);
    const LossEval ev = d.with_grad(a, b);
    EXPECT_DOUBLE_EQ(ev.loss, d(a, b));
    const auto sq = row_squared_norms(a - b);
    auto frozen = [&](const Tensor& x) {
      const auto s = row_squared_norms(x - b);
      double acc = 0.0;
      for (std::size_t r = 0; r < s.size(); ++r) acc += s[r] / std::pow(sq[r] + d.c * d.c, 1 - d.p);
      return acc / static_cast<double>(s.size());
    };
    const double h = 1e-6;
    for (std::size_t k = 0; k < a.size(); ++k) {
      Tensor p = a, m = a;
      p[k] += h;
      m[k] -= h;
      EXPECT_LT(rel_err(ev.seed[k], (frozen(p) - frozen(m)) / (2 * h), 1e-8), 1e-5);
    }
  }
}

TEST(AdaptiveDistance, ShapeMismatchRejected) {
  EXPECT_THROW(AdaptiveDistance{}(Tensor({2, 2}), Tensor({2, 3})), ShapeError);
}

TEST(Guidance, UnitWeightReturnsConditional) {
  Rng rng(3);
  const Tensor c = rng.normal_tensor(5, 2), u = rng.normal_tensor(5, 2);
  for (bool norm : {false, true}) EXPECT_EQ(guided_velocity(c, u, {1.0, 1.0, norm}), c);
}

TEST(Guidance, ZeroDirectionReturnsConditional) {
  const Tensor c = row_tensor({0.3, -0.2});
  EXPECT_EQ(guided_velocity(c, c, {3.0, 1.0, true}), c);
}

TEST(Guidance, NormalizedExample) {
  const Tensor out = guided_velocity(row_tensor({1.0, 0.0}), row_tensor({0.0, 0.0}), {2.0, 1.0, true});
  EXPECT_EQ(out, row_tensor({2.0, 0.0}));
}

TEST(Guidance, UnnormalizedIsLinearExtrapolation) {
  const Tensor out = guided_velocity(row_tensor({1.0, 2.0}), row_tensor({0.0, 1.0}), {3.0, 1.0, false});
  EXPECT_EQ(out, row_tensor({3.0, 4.0}));
}

TEST(Guidance, NormalizedStepHasLengthEta) {
  Rng rng(4);
  const Tensor c = rng.normal_tensor(20, 3), u = rng.normal_tensor(20, 3);
  const Tensor out = guided_velocity(c, u, {2.5, 0.7, true});
  const auto n = row_squared_norms(out - c);
  for (double v : n) EXPECT_NEAR(std::sqrt(v), 1.5 * 0.7, 1e-12);
}

TEST(CosineLoss, ZeroRowsContributeNothing) {
  const Tensor a({2, 2}, std::vector<double>{0.0, 0.0, 1.0, 0.0});
  const Tensor b({2, 2}, std::vector<double>{1.0, 1.0, 0.0, 0.0});
  const LossEval ev = cosine_loss(a, b);
  EXPECT_EQ(ev.loss, 0.0);
  EXPECT_TRUE(ev.seed.all_zero());
}

TEST(CosineLoss, NeverNegative) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Tensor a = rng.normal_tensor(16, 2);
    EXPECT_GE(cosine_loss(a, 3.0 * a).loss, 0.0);
  }
}

TEST(FmLoss, AntiparallelAddsTwo) {
  Rng rng(6);
  const Tensor v = rng.normal_tensor(6, 2);
  const Tensor f = -1.0 * v;
  const AdaptiveDistance d{};
  EXPECT_NEAR(fm_loss_terms(f, v, d, 1.0).loss, d(f, v) + 2.0, 1e-12);
  EXPECT_EQ(fm_loss_terms(v, v, d, 1.0).loss, 0.0);
}

TEST(FmLoss, GradientMatchesFiniteDifferencesWithoutCosine) {
  const AdaptiveDistance d{1.0, 1e-3};
  Rng rng(7);
  const Tensor a = rng.normal_tensor(3, 2), b = rng.normal_tensor(3, 2);
  const LossEval ev = fm_loss_terms(a, b, d, 0.0);
  const double h = 1e-6;
  for (std::size_t k = 0; k < a.size(); ++k) {
    Tensor p = a, m = a;
    p[k] += h;
    m[k] -= h;
    const double fd = (fm_loss_terms(p, b, d, 0.0).loss - fm_loss_terms(m, b, d, 0.0).loss) / (2 * h);
    EXPECT_LT(rel_err(ev.seed[k], fd, 1e-8), 1e-6);
  }
}

TEST(CosineLoss, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  const Tensor a = rng.normal_tensor(3, 3), b = rng.normal_tensor(3, 3);
  const LossEval ev = cosine_loss(a, b);
  const double h = 1e-6;
  for (std::size_t k = 0; k < a.size(); ++k) {
    Tensor p = a, m = a;
    p[k] += h;
    m[k] -= h;
    const double fd = (cosine_loss(p, b).loss - cosine_loss(m, b).loss) / (2 * h);
    EXPECT_LT(rel_err(ev.seed[k], fd, 1e-8), 1e-6);
  }
}

TEST(CmResidual, ScalarExample) {
  const std::vector<double> t{0.5};
  const Tensor g = cm_residual(row_tensor({2.0}), row_tensor({1.0}), row_tensor({0.5}), t);
  const Tensor target = weighted_target(row_tensor({2.0}), g, std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(target[0], 1.25);
}

TEST(CmResidual, FixedPointHasZeroResidual) {
  const std::vector<double> t{0.3, 0.8};
  const Tensor f({2, 2}, std::vector<double>{1.0, -1.0, 0.5, 2.0});
  const Tensor g = cm_residual(f, f, Tensor({2, 2}), t);
  EXPECT_TRUE(g.all_zero());
  EXPECT_EQ(weighted_target(f, g, std::vector<double>{0.4, 1.0}), f);
}

TEST(N2nResidual, ScalarExample) {
  const std::vector<double> r{0.0}, t{0.5};
  const Tensor g = n2n_residual(row_tensor({1.0}), row_tensor({2.0}), row_tensor({0.0}), row_tensor({0.0}), r, t, 1.0, 1.0);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(weighted_target(row_tensor({1.0}), g, std::vector<double>{1.0})[0], 1.0);
}

TEST(N2nResidual, Reductions) {
  Rng rng(9);
  const Tensor f = rng.normal_tensor(4, 2), a = rng.normal_tensor(4, 2), b = rng.normal_tensor(4, 2),
               df = rng.normal_tensor(4, 2);
  const std::vector<double> r(4, 0.0), t{0.2, 0.4, 0.6, 1.0};
  // lambda = 1, gamma = 0: mean-velocity residual over [r, t].
  Tensor expect = f - a;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) expect.at(i, j) -= t[i] * df.at(i, j);
  EXPECT_LT(max_abs_diff(n2n_residual(f, a, b, df, r, t, 1.0, 0.0), expect), 1e-15);
  // lambda = 0, gamma = 1: right-endpoint velocity matching.
  EXPECT_EQ(n2n_residual(f, a, b, df, r, t, 0.0, 1.0), f - b);
}

class TargetTest : public ::testing::Test {
 protected:
  TargetTest() : net_(random_net(small_arch(2), 40)), rng_(10) {
    x_ = rng_.normal_tensor(6, 2);
    v_ = rng_.normal_tensor(6, 2);
    v2_ = rng_.normal_tensor(6, 2);
  }
  VelocityNet net_;
  Rng rng_;
  Tensor x_, v_, v2_;
  std::vector<double> t_{0.0625, 0.125, 0.25, 0.5, 0.75, 0.875};
  std::vector<int> labels_{0, 1, kNullClass, 0, 1, 1};
};

TEST_F(TargetTest, CmTargetMatchesIndependentAssembly) {
  const LossTarget lt = cm_target(net_, x_, t_, labels_, v_, WeightFn{});
  EXPECT_EQ(lt.branch, Branch::kCm);
  const Conditioning cond{t_, std::vector<double>(6, 1.0), labels_};
  const Tensor f = net_.eval(x_, cond);
  EXPECT_EQ(lt.prediction.output, f);
  // dF/dt along (v, 1, 0) by a Richardson-extrapolated central difference.
  auto central = [&](double eps) {
    Tensor xp = x_, xm = x_;
    axpy(eps, v_, xp);
    axpy(-eps, v_, xm);
    Conditioning cp = cond, cm = cond;
    for (std::size_t i = 0; i < 6; ++i) {
      cp.t[i] += eps;
      cm.t[i] -= eps;
    }
    return (0.5 / eps) * (net_.eval(xp, cp) - net_.eval(xm, cm));
  };
  const Tensor df = (4.0 / 3.0) * central(5e-4) - (1.0 / 3.0) * central(1e-3);
  // w1 = 1 reduces the target to v + (1 - t) dF/dt.
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_LT(rel_err(lt.target.at(i, j), v_.at(i, j) + (1 - t_[i]) * df.at(i, j), 1e-3), 1e-5);
}

TEST_F(TargetTest, N2nTargetPinsPredictionAtLeftEndpoint) {
  std::vector<double> r(6, 0.0), t{0.125, 0.25, 0.5, 0.75, 0.875, 1.0};
  const LossTarget lt = n2n_target(net_, x_, r, t, labels_, v_, v2_, {1.0, 1.0}, WeightFn{});
  EXPECT_EQ(lt.branch, Branch::kN2n);
  EXPECT_EQ(lt.prediction.output, net_.eval(x_, Conditioning{r, t, labels_}));
  EXPECT_TRUE(lt.target.all_finite());
}

TEST_F(TargetTest, N2nTargetMatchesIndependentAssembly) {
  // r > 0 keeps the difference stencil inside [0, 1].
  const std::vector<double> r(6, 0.1), t{0.25, 0.375, 0.5, 0.75, 0.875, 0.95};
  const LossTarget lt = n2n_target(net_, x_, r, t, labels_, v_, v2_, {1.0, 1.0}, WeightFn{});
  const Conditioning cond{r, t, labels_};
  const Tensor f = net_.eval(x_, cond);
  EXPECT_EQ(lt.prediction.output, f);
  // Derivative along (v_r, 1, -1) by Richardson-extrapolated differences.
  auto central = [&](double eps) {
    Tensor xp = x_, xm = x_;
    axpy(eps, v_, xp);
    axpy(-eps, v_, xm);
    Conditioning cp = cond, cm = cond;
    for (std::size_t i = 0; i < 6; ++i) {
      cp.t[i] += eps;
      cp.s[i] -= eps;
      cm.t[i] -= eps;
      cm.s[i] += eps;
    }
    return (0.5 / eps) * (net_.eval(xp, cp) - net_.eval(xm, cm));
  };
  const Tensor df = (4.0 / 3.0) * central(5e-4) - (1.0 / 3.0) * central(1e-3);
  // g = 2F - (v_r + (t - r) dF) - v_t, and w2 = 1 gives F - g / 2.
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double g = 2 * f.at(i, j) - (v_.at(i, j) + (t[i] - r[i]) * df.at(i, j)) - v2_.at(i, j);
      EXPECT_LT(rel_err(lt.target.at(i, j), f.at(i, j) - 0.5 * g, 1e-3), 1e-5);
    }
  }
}

TEST_F(TargetTest, N2nRejectsDegenerateInterval) {
  std::vector<double> r(6, 0.0), t(6, 0.0);
  EXPECT_THROW(n2n_target(net_, x_, r, t, labels_, v_, v2_, {}, WeightFn{}), DomainError);
}

// The target is a plain tensor computed from a frozen snapshot: perturbing the
// weights afterwards does not change it, and the gradient seed only reaches
// the prediction tape.
TEST_F(TargetTest, TargetIsDetachedFromWeights) {
  const LossTarget lt = cm_target(net_, x_, t_, labels_, v_, WeightFn{});
  const Tensor before = lt.target;
  for (auto& w : net_.params())
    for (double& v : w.data()) v += 0.1;
  EXPECT_EQ(lt.target, before);
  // The loss gradient equals the gradient of 0.5 ||F - c||^2 with c constant.
  const LossEval ev = fm_loss_terms(lt.prediction.output, lt.target, AdaptiveDistance{1.0, 0.0}, 0.0);
  EXPECT_LT(max_abs_diff(ev.seed, (2.0 / 6.0) * (lt.prediction.output - lt.target)), 1e-15);
}

TEST_F(TargetTest, InstabilityProbeSplitsTerms) {
  const InstabilityTerms it = instability_probe(net_, x_, t_, labels_, v_);
  const LossTarget lt = cm_target(net_, x_, t_, labels_, v_, WeightFn{});
  EXPECT_DOUBLE_EQ(it.term_sup, lt.diagnostics.term_sup);
  EXPECT_DOUBLE_EQ(it.term_self, lt.diagnostics.term_self);
  EXPECT_GT(it.term_sup, 0.0);
}

TEST(BranchNames, Strings) {
  EXPECT_EQ(to_string(Branch::kFm), "fm");
  EXPECT_EQ(to_string(Branch::kCm), "cm");
  EXPECT_EQ(to_string(Branch::kN2n), "n2n");
}

}  // namespace
}  // namespace fmlab
