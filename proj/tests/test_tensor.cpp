// Copyright 2026 The revmine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "revmine/checkpoint.hpp"
#include "revmine/tensor.hpp"

namespace revmine::tensor {
namespace {

Tensor randn_like(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return Tensor::from(std::move(shape), std::move(v), true);
}

TEST(Ops, SoftmaxUniform) {
  const auto s = softmax(Tensor::from({3}, {0, 0, 0}));
  for (double v : s.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Ops, SoftmaxRowsAreDistributions) {
  Rng rng(3);
  const auto x = randn_like({7, 5}, rng, 50.0);
  const auto s = softmax(x);
  for (std::size_t r = 0; r < 7; ++r) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_GE(s.values()[r * 5 + j], 0.0);
      sum += s.values()[r * 5 + j];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  const auto big = softmax(Tensor::from({2}, {1000.0, 1000.0}));
  EXPECT_DOUBLE_EQ(big.values()[0], 0.5);
}

TEST(Ops, ConvOutputLength) {
  Rng rng(1);
  const auto x = randn_like({1, 5, 2}, rng);
  const auto w = randn_like({6, 4}, rng);
  const auto b = randn_like({4}, rng);
  const auto y = conv1d(x, w, b, 3);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 4}));
  EXPECT_THROW(conv1d(x, w, b, 6), DomainError);
}

TEST(Ops, ConvMatchesDirectSum) {
  Rng rng(2);
  const std::size_t T = 6, D = 3, F = 2, w = 2;
  const auto x = randn_like({1, T, D}, rng);
  const auto W = randn_like({w * D, F}, rng);
  const auto b = randn_like({F}, rng);
  const auto y = conv1d(x, W, b, w);
  for (std::size_t p = 0; p + w <= T; ++p) {
    for (std::size_t f = 0; f < F; ++f) {
      double s = b.values()[f];
      for (std::size_t o = 0; o < w; ++o) {
        for (std::size_t d = 0; d < D; ++d) s += x.values()[(p + o) * D + d] * W.values()[(o * D + d) * F + f];
      }
      EXPECT_NEAR(y.values()[p * F + f], s, 1e-12);
    }
  }
}

TEST(Ops, MaxPoolColumnwise) {
  const auto y = max_pool_over_time(Tensor::from({3, 2}, {1, 4, 3, 2, 0, 0}));
  EXPECT_EQ(y.shape(), (Shape{2}));
  EXPECT_EQ(y.values()[0], 3.0);
  EXPECT_EQ(y.values()[1], 4.0);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  try {
    (void)matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos);
  }
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), DomainError);
}

TEST(Ops, DropoutContract) {
  Rng rng(5);
  const auto x = randn_like({1000}, rng);
  const auto same = dropout(x, 0.0, true, 9);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(same.values()[i], x.values()[i]);
  const auto eval = dropout(x, 0.5, false, 9);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(eval.values()[i], x.values()[i]);
  const auto a = dropout(x, 0.5, true, 9);
  const auto b = dropout(x, 0.5, true, 9);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    EXPECT_EQ(a.values()[i], b.values()[i]);
    if (a.values()[i] == 0.0) {
      ++zeros;
    } else {
      EXPECT_NEAR(a.values()[i], 2.0 * x.values()[i], 1e-15);
    }
  }
  EXPECT_GT(zeros, 400u);
  EXPECT_LT(zeros, 600u);
  EXPECT_THROW(dropout(x, 1.0, true, 9), DomainError);
}

TEST(Ops, CrossEntropyNonNegative) {
  const int t[] = {1};
  EXPECT_DOUBLE_EQ(cross_entropy(Tensor::from({1, 3}, {0, 1, 0}), t).item(), 0.0);
  EXPECT_GT(cross_entropy(Tensor::from({1, 3}, {0.1, 0.8, 0.1}), t).item(), 0.0);
  const int bad[] = {3};
  EXPECT_THROW(cross_entropy(Tensor::from({1, 3}, {0, 1, 0}), bad), DomainError);
}

TEST(Backward, Square) {
  auto x = Tensor::scalar(3.0, true);
  backward(mul(x, x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
  // a second call accumulates
  backward(mul(x, x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Backward, MatmulSumGradient) {
  Rng rng(8);
  auto A = randn_like({3, 4}, rng);
  auto B = randn_like({4, 2}, rng);
  backward(sum(matmul(A, B)));
  // d/dA_ik sum_ij (AB)_ij = sum_j B_kj
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(A.grad()[i * 4 + k], B.values()[k * 2] + B.values()[k * 2 + 1], 1e-12);
    }
  }
  A.zero_grad();
  B.zero_grad();
  EXPECT_LT(grad_check([&] { return sum(matmul(A, B)); }, {A, B}), 1e-6);
}

TEST(Backward, DisconnectedParameterHasZeroGrad) {
  auto x = Tensor::scalar(2.0, true);
  auto y = Tensor::scalar(5.0, true);
  backward(scale(x, 3.0));
  EXPECT_EQ(y.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[0], 3.0);
}

TEST(Backward, NonScalarIsAnError) { EXPECT_THROW(backward(Tensor::zeros({2}, true)), DomainError); }

TEST(GradCheck, SumOfSquares) {
  Rng rng(4);
  auto x = randn_like({10}, rng);
  EXPECT_LT(grad_check([&] { return sum(mul(x, x)); }, {x}), 1e-6);
}

TEST(GradCheck, EveryOp) {
  Rng rng(6);
  auto x = randn_like({2, 5, 3}, rng);
  auto W = randn_like({6, 4}, rng);
  auto b = randn_like({4}, rng);
  auto g = randn_like({4}, rng);
  auto beta = randn_like({4}, rng);
  auto E = randn_like({6, 3}, rng);
  auto H = randn_like({2, 4}, rng);
  auto V = randn_like({4, 3}, rng);
  const std::vector<std::int32_t> ids{1, 5, 2, 2, 0, 3, 4, 1, 1, 0};
  const int targets[] = {2, 0};
  const int binary[] = {1, 0};
  auto loss = [&] {
    auto emb = embedding_lookup(E, ids, {2, 5});
    auto conv = relu(conv1d(add(x, emb), W, b, 2));
    auto pooled = max_pool_over_time(tanh(conv));
    auto normed = layer_norm(pooled, g, beta);
    auto mixed = blend_rows(std::vector<double>{0.3, 1.0}, normed, sigmoid(H));
    auto scores = bmm(reshape(mixed, {1, 2, 4}), reshape(H, {1, 2, 4}), true);
    auto ctx = bmm(softmax(scores), reshape(add_bias(mixed, b), {1, 2, 4}));
    auto logits = matmul(reshape(ctx, {2, 4}), V);
    auto extra = concat({slice_last(mixed, 0, 1), slice_last(logits, 2, 1)});
    return add(add(softmax_cross_entropy(logits, targets),
                   binary_cross_entropy_with_logits(slice_last(extra, 1, 1), binary)),
               mean(mul(gather_rows(extra, {1, 0, 1}), gather_rows(extra, {0, 0, 1}))));
  };
  EXPECT_LT(grad_check(loss, {x, W, b, g, beta, E, H, V}), 1e-6);
}

TEST(GradCheck, GeluAndSwapMiddle) {
  Rng rng(21);
  auto x = randn_like({2, 3, 4, 2}, rng);
  auto w = randn_like({2, 4, 3, 2}, rng);
  auto loss = [&] { return sum(mul(gelu(swap_middle(x)), w)); };
  EXPECT_LT(grad_check(loss, {x, w}), 1e-6);
  const auto y = swap_middle(x);
  EXPECT_EQ(y.shape(), (Shape{2, 4, 3, 2}));
  // element [a, b, c, d] of x lands at [a, c, b, d]
  EXPECT_DOUBLE_EQ(y.values()[((1 * 4 + 3) * 3 + 2) * 2 + 1], x.values()[((1 * 3 + 2) * 4 + 3) * 2 + 1]);
  EXPECT_NEAR(gelu(Tensor::scalar(1.0)).item(), 0.8411919906, 1e-9);
}

TEST(GradCheck, ConvMaxPoolBatched) {
  Rng rng(12);
  auto x = randn_like({3, 7, 4}, rng);
  auto W = randn_like({12, 5}, rng);
  auto b = randn_like({5}, rng);
  auto loss = [&] { return sum(mul(max_pool_over_time(conv1d(x, W, b, 3)), max_pool_over_time(conv1d(x, W, b, 3)))); };
  EXPECT_LT(grad_check(loss, {x, W, b}), 1e-6);
}

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.0, 0.0};
  AdamState st(2);
  adam_step(p, g, st, 0.1);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(st.step_count, 1u);
}

TEST(Adam, FirstStepIsLrTimesSign) {
  std::vector<double> p{0.0, 0.0};
  const std::vector<double> g{0.3, -7.0};
  AdamState st(2);
  adam_step(p, g, st, 0.01);
  EXPECT_NEAR(p[0], -0.01, 1e-9);
  EXPECT_NEAR(p[1], 0.01, 1e-9);
}

TEST(Adam, ConvergesOnQuadratic) {
  auto x = Tensor::scalar(0.0, true);
  Adam opt({x});
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    auto d = add_constant(x, {-0.5});
    backward(mul(d, d));
    opt.step(0.01);
  }
  // the autodiff path and the free function must agree step for step
  std::vector<double> p{0.0};
  AdamState st(1);
  for (int i = 0; i < 200; ++i) adam_step(p, std::vector<double>{2.0 * (p[0] - 0.5)}, st, 0.01);
  EXPECT_NEAR(p[0], x.item(), 1e-12);
  EXPECT_LT(std::abs(x.item() - 0.5), 1e-2);
}

TEST(Adam, RejectsNonPositiveLr) {
  std::vector<double> p{0.0};
  AdamState st(1);
  EXPECT_THROW(adam_step(p, std::vector<double>{1.0}, st, 0.0), DomainError);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(2);
  std::vector<NamedTensor> in{{"embed", randn_like({3, 2}, rng)}, {"bias", randn_like({4}, rng)}};
  std::stringstream ss;
  write_checkpoint(ss, in);
  const auto out = read_checkpoint(ss);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].name, "embed");
  EXPECT_EQ(out[0].tensor.shape(), (Shape{3, 2}));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out[0].tensor.values()[i], in[0].tensor.values()[i]);
  EXPECT_EQ(out[1].tensor.values()[3], in[1].tensor.values()[3]);
  std::stringstream bad("NOTACKPT");
  EXPECT_THROW(read_checkpoint(bad), FormatError);
}

}  // namespace
}  // namespace revmine::tensor
