// tests/numeric_test.cpp

// Copyright 2026  The erna authors

// See ../LICENSE for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "erna/numeric/gradcheck.hpp"
#include "erna/numeric/graph.hpp"
#include "erna/numeric/lstm.hpp"
#include "erna/numeric/ops.hpp"
#include "erna/numeric/random.hpp"

namespace erna {
namespace {

using T64 = Tensor<double>;
using G64 = Graph<double>;
using V64 = Var<double>;

T64 random_tensor(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  T64 t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}

TEST(MatmulTest, Examples) {
  G64 g;
  auto id = g.constant(T64({2, 2}, {1, 0, 0, 1}));
  auto b = g.constant(T64({2, 2}, {3, 4, 5, 6}));
  EXPECT_EQ(ops::matmul(id, b).value(), (std::vector<double>{3, 4, 5, 6}));
  auto z = g.constant(T64({2, 2}));
  EXPECT_EQ(ops::matmul(z, b).value(), (std::vector<double>{0, 0, 0, 0}));
  auto a = g.constant(T64({2, 2}, {1, 2, 3, 4}));
  auto c = g.constant(T64({2, 2}, {5, 6, 7, 8}));
  EXPECT_EQ(ops::matmul(a, c).value(), (std::vector<double>{19, 22, 43, 50}));
}

TEST(MatmulTest, ShapeErrorNamesBothShapes) {
  G64 g;
  auto a = g.constant(T64({2, 3}));
  auto b = g.constant(T64({2, 3}));
  try {
    ops::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
  }
}

// Direct nested-loop convolution, written independently of ops::conv2d.
T64 conv_oracle(const T64& in, const T64& k, std::size_t st, std::size_t sf) {
  const long T = long(in.dim(0)), F = long(in.dim(1)), C = long(in.dim(2));
  const long kt = long(k.dim(0)), kf = long(k.dim(1)), D = long(k.dim(3));
  const long To = (T + long(st) - 1) / long(st), Fo = (F + long(sf) - 1) / long(sf);
  T64 out({std::size_t(To), std::size_t(Fo), std::size_t(D)});
  for (long a = 0; a < To; ++a)
    for (long b = 0; b < Fo; ++b)
      for (long d = 0; d < D; ++d) {
        double s = 0;
        for (long i = 0; i < kt; ++i)
          for (long j = 0; j < kf; ++j)
            for (long c = 0; c < C; ++c) {
              const long t = a * long(st) + i - (kt - 1) / 2;
              const long f = b * long(sf) + j - (kf - 1) / 2;
              if (t < 0 || t >= T || f < 0 || f >= F) continue;
              s += in.data[(t * F + f) * C + c] * k.data[((i * kf + j) * C + c) * D + d];
            }
        out.data[(a * Fo + b) * D + d] = s;
      }
  return out;
}

TEST(Conv2dTest, StridedOutputLength) {
  G64 g;
  auto x = g.constant(T64({7, 4, 1}));
  auto k = g.constant(T64({3, 3, 1, 1}));
  EXPECT_EQ(ops::conv2d(x, k, 2, 1).shape(), (Shape{4, 4, 1}));
}

TEST(Conv2dTest, OneByOneOnesKernelSumsChannels) {
  Rng rng(1);
  G64 g;
  auto in = random_tensor({3, 2, 2}, rng);
  auto x = g.constant(in);
  auto k = g.constant(T64({1, 1, 2, 1}, {1, 1}));
  auto y = ops::conv2d(x, k, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{3, 2, 1}));
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_DOUBLE_EQ(y.value()[i], in.data[2 * i] + in.data[2 * i + 1]);
}

TEST(Conv2dTest, MatchesSlidingWindowOracle) {
  Rng rng(2);
  for (auto [st, sf] : {std::pair{1, 1}, {2, 2}, {2, 1}, {3, 2}}) {
    G64 g;
    auto in = random_tensor({5, 4, 1}, rng);
    auto kt = random_tensor({3, 3, 1, 2}, rng);
    auto y = ops::conv2d(g.constant(in), g.constant(kt), st, sf);
    auto want = conv_oracle(in, kt, st, sf);
    ASSERT_EQ(y.shape(), want.shape);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y.value()[i], want.data[i], 1e-12);
  }
}

TEST(Conv2dTest, ZeroSizedInputThrows) {
  G64 g;
  auto x = g.constant(T64({0, 4, 1}));
  auto k = g.constant(T64({3, 3, 1, 1}));
  EXPECT_THROW(ops::conv2d(x, k, 1, 1), ShapeError);
}

TEST(MaxPoolTest, Examples) {
  G64 g;
  auto a = ops::max_pool_time(g.constant(T64({4, 1}, {2, 5, 1, 3})), 2);
  EXPECT_EQ(a.value(), (std::vector<double>{5, 3}));
  auto b = ops::max_pool_time(g.constant(T64({3, 1}, {2, 5, 1})), 2);
  EXPECT_EQ(b.value(), (std::vector<double>{5, 1}));
  // all-negative tail surfaces the zero padding
  auto c = ops::max_pool_time(g.constant(T64({1, 1}, {-3})), 2);
  EXPECT_EQ(c.value(), (std::vector<double>{0}));
  auto d = ops::max_pool_time(g.constant(T64({2, 1}, {-3, -1})), 2);
  EXPECT_EQ(d.value(), (std::vector<double>{-1}));
  EXPECT_THROW(ops::max_pool_time(g.constant(T64({2, 1})), 0), ConfigError);
}

TEST(LengthProperty, ConvAndPoolUseCeilRule) {
  for (std::size_t T = 1; T <= 32; ++T)
    for (std::size_t s = 1; s <= 4; ++s) {
      G64 g;
      auto x3 = g.constant(T64({T, 3, 1}));
      auto k = g.constant(T64({3, 3, 1, 1}));
      EXPECT_EQ(ops::conv2d(x3, k, s, 1).shape()[0], (T + s - 1) / s);
      auto x2 = g.constant(T64({T, 2}));
      EXPECT_EQ(ops::max_pool_time(x2, s).shape()[0], (T + s - 1) / s);
    }
}

TEST(ActivationTest, Examples) {
  G64 g;
  auto x = g.constant(T64({3}, {0, -2.5, 3}));
  EXPECT_DOUBLE_EQ(ops::sigmoid(x).value()[0], 0.5);
  EXPECT_DOUBLE_EQ(ops::tanh(x).value()[0], 0.0);
  auto r = ops::relu(x);
  EXPECT_EQ(r.value()[1], 0.0);
  EXPECT_EQ(r.value()[2], 3.0);
}

TEST(SoftmaxTest, Examples) {
  G64 g;
  auto eq = ops::softmax(g.constant(T64({4}, {0.3, 0.3, 0.3, 0.3})));
  for (double v : eq.value()) EXPECT_DOUBLE_EQ(v, 0.25);
  auto a = ops::softmax(g.constant(T64({3}, {1, -2, 0.5})));
  auto b = ops::softmax(g.constant(T64({3}, {101, 98, 100.5})));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a.value()[i], b.value()[i], 1e-12);
  auto big = ops::softmax(g.constant(T64({2}, {1000, 0})));
  EXPECT_DOUBLE_EQ(big.value()[0], 1.0);
  EXPECT_TRUE(std::isfinite(big.value()[1]));
}

TEST(SoftmaxTest, RowsSumToOneForArbitraryLogits) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    G64 g;
    auto x = g.constant(random_tensor({4, 7}, rng, -300, 300));
    auto p = ops::softmax(x);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < 7; ++k) s += p.value()[r * 7 + k];
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(LayerNormTest, ConstantRowGivesZeros) {
  G64 g;
  auto y = ops::layer_norm(g.constant(T64({1, 4}, {2, 2, 2, 2})),
                           g.constant(T64({4}, {1, 1, 1, 1})), g.constant(T64({4})));
  for (double v : y.value()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNormTest, MeanIsBiasAndStdIsGain) {
  Rng rng(4);
  G64 g;
  const std::size_t d = 64;
  T64 gain({d}), bias({d});
  std::fill(gain.data.begin(), gain.data.end(), -1.7);
  std::fill(bias.data.begin(), bias.data.end(), 0.4);
  auto y = ops::layer_norm(g.constant(random_tensor({3, d}, rng, -5, 5)), g.constant(gain),
                           g.constant(bias));
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0;
    for (std::size_t k = 0; k < d; ++k) mean += y.value()[r * d + k];
    mean /= d;
    for (std::size_t k = 0; k < d; ++k) var += std::pow(y.value()[r * d + k] - mean, 2);
    EXPECT_NEAR(mean, 0.4, 1e-9);
    EXPECT_NEAR(std::sqrt(var / d), 1.7, 1e-3);
  }
}

TEST(LogAddExpTest, Examples) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_DOUBLE_EQ(log_add_exp(0.0, 0.0), std::log(2.0));
  EXPECT_EQ(log_add_exp(-inf, -3.5), -3.5);
  EXPECT_EQ(log_add_exp(-3.5, -inf), -3.5);
  EXPECT_EQ(log_add_exp(-inf, -inf), -inf);
  const double v = log_add_exp(-1000.0, -1001.0);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -1000.0 + std::log1p(std::exp(-1.0)), 1e-12);
}

TEST(LogAddExpTest, CommutativeAndAssociative) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double a = uniform(rng, -50, 5), b = uniform(rng, -50, 5), c = uniform(rng, -50, 5);
    EXPECT_NEAR(log_add_exp(a, b), log_add_exp(b, a), 1e-12);
    EXPECT_NEAR(log_add_exp(log_add_exp(a, b), c), log_add_exp(a, log_add_exp(b, c)), 1e-12);
  }
}

TEST(BackwardTest, SumGivesOnes) {
  Param<double> x("x", T64({3}, {1, -2, 5}));
  G64 g;
  g.backward(ops::sum(g.param(x)));
  EXPECT_EQ(x.grad.data, (std::vector<double>{1, 1, 1}));
}

TEST(BackwardTest, SquareGivesTwoX) {
  Param<double> x("x", T64({2}, {1, 2}));
  G64 g;
  auto v = g.param(x);
  g.backward(ops::sum(ops::mul(v, v)));
  EXPECT_EQ(x.grad.data, (std::vector<double>{2, 4}));
}

TEST(BackwardTest, RepeatedCallsAccumulate) {
  Param<double> x("x", T64({2}, {1, 2}));
  G64 g;
  auto loss = ops::sum(g.param(x));
  g.backward(loss);
  g.backward(loss);
  EXPECT_EQ(x.grad.data, (std::vector<double>{2, 2}));
}

TEST(BackwardTest, NonScalarLossIsUsageError) {
  Param<double> x("x", T64({2}, {1, 2}));
  G64 g;
  EXPECT_THROW(g.backward(g.param(x)), UsageError);
}

TEST(BackwardTest, FrozenParamGetsNoGradient) {
  Param<double> x("x", T64({2}, {1, 2}));
  Param<double> w("w", T64({2}, {3, 4}));
  w.frozen = true;
  G64 g;
  g.backward(ops::sum(ops::mul(g.param(x), g.param(w))));
  EXPECT_EQ(x.grad.data, (std::vector<double>{3, 4}));
  EXPECT_EQ(w.grad.data, (std::vector<double>{0, 0}));
}

TEST(GradCheckTest, QuadraticIsExactInDoublePrecision) {
  Param<double> p("p", T64({5}, {0.3, -1.2, 2.0, 0.01, -0.7}));
  std::vector<Param<double>*> ps{&p};
  auto f = [&](G64& g) {
    auto v = g.param(p);
    return ops::sum(ops::mul(v, v));
  };
  EXPECT_LT(grad_check<double>(f, ps, 1e-5).max_rel_error, 1e-8);
}

TEST(GradCheckTest, CorruptedGradientIsFlagged) {
  Rng rng(6);
  Param<double> p("p", random_tensor({6}, rng));
  std::vector<Param<double>*> ps{&p};
  auto f = [&](G64& g) {
    auto v = g.param(p);
    return ops::sum(ops::tanh(ops::mul(v, v)));
  };
  grad_check<double>(f, ps, 1e-5);
  std::vector<std::vector<double>> corrupted{p.grad.data};
  for (auto& v : corrupted[0]) v *= 1.01;
  const auto r = compare_gradients<double>(f, ps, corrupted, 1e-5);
  EXPECT_NEAR(r.max_rel_error, 0.01 / 1.01, 1e-4);
  EXPECT_GT(r.max_rel_error, 1e-4);
}

TEST(GradCheckTest, NonFiniteLossAborts) {
  Param<double> p("p", T64({1}, {1e-6}));
  std::vector<Param<double>*> ps{&p};
  auto f = [&](G64& g) {
    auto v = g.param(p);
    // log of a clamped quantity: infinite once p goes negative
    auto pr = ops::relu(v);
    return ops::sum(ops::log_softmax(ops::scale(pr, -std::numeric_limits<double>::infinity())));
  };
  EXPECT_THROW(numeric_gradient<double>(f, std::span<Param<double>* const>(ps), 1e-5),
               NumericError);
}

// Every differentiable op, on random small inputs, passes the 1e-4 gate.
class OpGradientTest : public ::testing::TestWithParam<int> {};

using LossBuilder = std::function<V64(G64&, std::vector<V64>&)>;

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  LossBuilder build;
};

std::vector<OpCase> op_cases() {
  // Weighted sums make every output coordinate matter with a distinct weight.
  auto weighted = [](G64& g, const V64& y) {
    T64 w(y.shape());
    for (std::size_t i = 0; i < w.size(); ++i) w.data[i] = std::sin(1.0 + 0.7 * double(i));
    return ops::sum(ops::mul(y, g.constant(w)));
  };
  return {
      {"matmul", {{3, 4}, {4, 2}}, [=](G64& g, auto& v) { return weighted(g, ops::matmul(v[0], v[1])); }},
      {"add_sub_mul", {{2, 3}, {2, 3}}, [=](G64& g, auto& v) {
         return weighted(g, ops::mul(ops::add(v[0], v[1]), ops::sub(v[0], v[1])));
       }},
      {"bias_scale", {{3, 4}, {4}}, [=](G64& g, auto& v) {
         return weighted(g, ops::scale(ops::add_bias(v[0], v[1]), 0.7));
       }},
      {"sigmoid", {{5}}, [=](G64& g, auto& v) { return weighted(g, ops::sigmoid(v[0])); }},
      {"tanh", {{5}}, [=](G64& g, auto& v) { return weighted(g, ops::tanh(v[0])); }},
      {"relu", {{6}}, [=](G64& g, auto& v) { return weighted(g, ops::relu(v[0])); }},
      {"softmax", {{2, 5}}, [=](G64& g, auto& v) { return weighted(g, ops::softmax(v[0])); }},
      {"log_softmax", {{2, 5}}, [=](G64& g, auto& v) { return weighted(g, ops::log_softmax(v[0])); }},
      {"layer_norm", {{3, 5}, {5}, {5}}, [=](G64& g, auto& v) {
         return weighted(g, ops::layer_norm(v[0], v[1], v[2]));
       }},
      {"conv2d", {{5, 4, 2}, {3, 3, 2, 3}}, [=](G64& g, auto& v) {
         return weighted(g, ops::conv2d(v[0], v[1], 2, 2));
       }},
      {"max_pool", {{7, 3}}, [=](G64& g, auto& v) { return weighted(g, ops::max_pool_time(v[0], 2)); }},
      {"row_conv", {{6, 3}, {3, 3}}, [=](G64& g, auto& v) { return weighted(g, ops::row_conv(v[0], v[1])); }},
      {"concat_pair_gather", {{3, 2}, {2, 3}}, [=](G64& g, auto& v) {
         auto p = ops::pair_rows(v[0], v[1]);
         auto q = ops::gather_rows(p, {0, 5, 5, 2});
         return weighted(g, ops::concat_cols(q, ops::reshape(q, {4, 5})));
       }},
      {"entropy", {{3, 4}}, [=](G64& g, auto& v) { return weighted(g, ops::softmax_entropy(v[0])); }},
      {"lstm", {{5, 3}, {3, 8}, {2, 8}, {8}}, [=](G64& g, auto& v) {
         return weighted(g, ops::lstm_sequence(v[0], v[1], v[2], v[3], false));
       }},
      {"lstm_reverse", {{5, 3}, {3, 8}, {2, 8}, {8}}, [=](G64& g, auto& v) {
         return weighted(g, ops::lstm_sequence(v[0], v[1], v[2], v[3], true));
       }},
  };
}

TEST_P(OpGradientTest, MatchesCentralDifferences) {
  const auto cases = op_cases();
  for (const auto& c : cases) {
    Rng rng(100 + GetParam());
    std::vector<Param<double>> params;
    params.reserve(c.shapes.size());
    for (std::size_t i = 0; i < c.shapes.size(); ++i)
      params.emplace_back("in" + std::to_string(i), random_tensor(c.shapes[i], rng));
    std::vector<Param<double>*> ptrs;
    for (auto& p : params) ptrs.push_back(&p);
    auto f = [&](G64& g) {
      std::vector<V64> vars;
      for (auto& p : params) vars.push_back(g.param(p));
      return c.build(g, vars);
    };
    const auto r = grad_check<double>(f, ptrs, 1e-5);
    EXPECT_LE(r.max_rel_error, 1e-4) << c.name << " worst " << r.worst_param << "["
                                     << r.worst_index << "] analytic " << r.analytic
                                     << " numeric " << r.numeric;
  }
}

INSTANTIATE_TEST_SUITE_P(RandomInputs, OpGradientTest, ::testing::Range(0, 5));

}  // namespace
}  // namespace erna
