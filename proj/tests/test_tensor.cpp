#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "lpca/core/gradcheck.hpp"
#include "lpca/core/ops.hpp"
#include "test_util.hpp"

namespace lpca {
namespace {

using testing::random_away_from_zero;
using testing::random_tensor;
using testing::weighted_sum;

TEST(Tensor, RejectsZeroDimsAndLengthMismatch) {
  EXPECT_THROW(Tensor<float>(Shape{1, 0, 2, 2}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Add, ElementwiseAndIdentity) {
  Tensor<double> a(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor<double> b(Shape{1, 1, 2, 2}, {1, 1, 1, 1});
  const auto y = add(a, b);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{2, 3, 4, 5}));
  const auto z = add(a, Tensor<double>::zeros(a.shape()));
  EXPECT_EQ(std::vector<double>(z.data().begin(), z.data().end()), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Add, PerChannelBiasBroadcast) {
  Tensor<double> a(Shape{2, 2, 1, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor<double> b(Shape{1, 2, 1, 1}, {10, 20});
  const auto y = add(a, b);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()),
            (std::vector<double>{11, 12, 23, 24, 15, 16, 27, 28}));
}

TEST(Add, RejectsMismatchNamingBothShapes) {
  Tensor<double> a(Shape{1, 2, 3, 3});
  Tensor<double> b(Shape{1, 2, 3, 2});
  try {
    add(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("(1,2,3,3)"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("(1,2,3,2)"), std::string::npos);
  }
}

TEST(Add, GradOfSumIsOnes) {
  auto a = random_tensor(Shape{2, 3, 4, 4}, 1).set_requires_grad(true);
  auto b = random_tensor(Shape{2, 3, 4, 4}, 2).set_requires_grad(true);
  backward_of<double>([&] { return sum_all(add(a, b)); });
  for (double g : a.grad()) EXPECT_EQ(g, 1.0);
  for (double g : b.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Matmul, IdentityAndHandProduct) {
  Tensor<double> eye(Shape{1, 1, 3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto x = random_tensor(Shape{1, 1, 3, 4}, 3);
  const auto y = matmul_batched(eye, x);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.at(i), x.at(i));

  Tensor<double> a(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor<double> b(Shape{1, 1, 2, 2}, {5, 6, 7, 8});
  const auto c = matmul_batched(a, b);
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()), (std::vector<double>{19, 22, 43, 50}));
}

TEST(Matmul, RejectsInnerMismatch) {
  EXPECT_THROW(matmul_batched(Tensor<double>(Shape{1, 2, 3, 4}), Tensor<double>(Shape{1, 2, 5, 2})),
               ShapeError);
  EXPECT_THROW(matmul_batched(Tensor<double>(Shape{1, 2, 3, 4}), Tensor<double>(Shape{1, 3, 4, 2})),
               ShapeError);
}

TEST(Matmul, Gradcheck) {
  const auto a = random_tensor(Shape{1, 2, 3, 4}, 4);
  const auto b = random_tensor(Shape{1, 2, 4, 5}, 5);
  const auto r = gradcheck([&] { return weighted_sum(matmul_batched(a, b)); }, {a, b});
  EXPECT_TRUE(r.ok(1e-6)) << r.max_rel_error;
}

TEST(Softmax, UniformAndOverflowSafe) {
  const auto y = softmax_last(Tensor<double>(Shape{1, 1, 1, 4}));
  for (double v : y.data()) EXPECT_EQ(v, 0.25);
  const auto z = softmax_last(Tensor<double>(Shape{1, 1, 1, 2}, {1000, 0}));
  EXPECT_EQ(z.at(0), 1.0);
  EXPECT_EQ(z.at(1), 0.0);
  EXPECT_TRUE(std::isfinite(z.at(0)));
}

TEST(Softmax, RejectsNaN) {
  Tensor<double> x(Shape{1, 1, 1, 3}, {0, std::numeric_limits<double>::quiet_NaN(), 1});
  EXPECT_THROW(softmax_last(x), NumericError);
}

TEST(Softmax, RowsSumToOneAndGradcheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_tensor(Shape{2, 3, 4, 7}, seed, -5, 5);
    const auto y = softmax_last(x);
    for (std::size_t r = 0; r < x.numel() / 7; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < 7; ++j) {
        const double v = y.at(r * 7 + j);
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 1.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
  const auto row = random_tensor(Shape{1, 1, 1, 7}, 11, -2, 2);
  const auto r = gradcheck([&] { return weighted_sum(softmax_last(row)); }, {row});
  EXPECT_TRUE(r.ok(1e-6)) << r.max_rel_error;
}

TEST(Relu, DefinitionAndZeroSubgradient) {
  auto x = Tensor<double>(Shape{1, 1, 1, 3}, {-1, 0, 2}).set_requires_grad(true);
  Tensor<double> y;
  backward_of<double>([&] {
    y = relu(x);
    return sum_all(y);
  });
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{0, 0, 1}));
}

TEST(Relu, GradcheckAwayFromKink) {
  const auto x = random_away_from_zero(Shape{2, 3, 4, 4}, 7);
  const auto r = gradcheck([&] { return sum_all(relu(x)); }, {x});
  EXPECT_TRUE(r.ok(1e-6)) << r.max_rel_error;
}

TEST(Concat, ShapeAndRejection) {
  const auto y = concat_channels(Tensor<double>(Shape{1, 3, 8, 8}), Tensor<double>(Shape{1, 5, 8, 8}));
  EXPECT_EQ(y.shape(), (Shape{1, 8, 8, 8}));
  EXPECT_THROW(concat_channels(Tensor<double>(Shape{1, 3, 8, 8}), Tensor<double>(Shape{1, 5, 8, 4})),
               ShapeError);
  EXPECT_THROW(concat_channels(Tensor<double>(Shape{2, 3, 8, 8}), Tensor<double>(Shape{1, 5, 8, 8})),
               ShapeError);
}

TEST(ExactOps, IntegerInputsAreExact) {
  Rng rng(3);
  std::vector<double> va(48), vb(48);
  for (auto& v : va) v = static_cast<double>(rng.uniform_int(-1000, 1000));
  for (auto& v : vb) v = static_cast<double>(rng.uniform_int(-1000, 1000));
  Tensor<double> a(Shape{1, 3, 4, 4}, va), b(Shape{1, 3, 4, 4}, vb);
  const auto s = add(a, b);
  const auto k = scale(a, 3.0);
  const auto c = concat_channels(a, b);
  for (std::size_t i = 0; i < 48; ++i) {
    EXPECT_EQ(s.at(i), va[i] + vb[i]);
    EXPECT_EQ(k.at(i), 3 * va[i]);
    EXPECT_EQ(c.at(i), va[i]);
    EXPECT_EQ(c.at(48 + i), vb[i]);
  }
}

TEST(Backward, SumAndScaleGrads) {
  auto x = Tensor<double>(Shape{1, 1, 2, 2}, {1, 2, 3, 4}).set_requires_grad(true);
  backward_of<double>([&] { return sum_all(x); });
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  x.zero_grad();
  backward_of<double>([&] { return sum_all(scale(x, 3.0)); });
  for (double g : x.grad()) EXPECT_EQ(g, 3.0);
}

TEST(Backward, AccumulatesUntilZeroGrad) {
  auto x = Tensor<double>(Shape{1, 1, 1, 2}, {1, 2}).set_requires_grad(true);
  Tape<double> tape;
  Tensor<double> loss;
  {
    TapeScope<double> scope(tape);
    loss = sum_all(scale(x, 2.0));
  }
  tape.backward(loss);
  tape.backward(loss);
  for (double g : x.grad()) EXPECT_EQ(g, 4.0);
  x.zero_grad();
  tape.backward(loss);
  for (double g : x.grad()) EXPECT_EQ(g, 2.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  auto x = random_tensor(Shape{1, 1, 2, 2}, 1).set_requires_grad(true);
  Tape<double> tape;
  Tensor<double> y;
  {
    TapeScope<double> scope(tape);
    y = relu(x);
  }
  EXPECT_THROW(tape.backward(y), ShapeError);
}

TEST(Tape, InputsPrecedeConsumers) {
  auto x = random_tensor(Shape{1, 2, 3, 3}, 1).set_requires_grad(true);
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    auto y = relu(add(x, x));
    sum_all(concat_channels(y, scale(y, 2.0)));
  }
  std::set<const TensorImpl<double>*> produced;
  for (const auto& node : tape.nodes()) {
    for (const auto& in : node.inputs) {
      if (!in->is_leaf) {
        EXPECT_TRUE(produced.count(in.get())) << node.op;
      }
    }
    produced.insert(node.output.get());
  }
}

TEST(Tape, ReplayIsBitIdentical) {
  const auto a = random_tensor(Shape{2, 3, 4, 5}, 8).set_requires_grad(true);
  const auto b = random_tensor(Shape{2, 3, 5, 4}, 9).set_requires_grad(true);
  auto run = [&] {
    Tensor<double> a2 = a, b2 = b;
    a2.mutable_grad();
    a2.zero_grad();
    b2.mutable_grad();
    b2.zero_grad();
    backward_of<double>([&] { return weighted_sum(softmax_last(matmul_batched(a, b))); });
    return std::vector<double>(a.grad().begin(), a.grad().end());
  };
  const auto g1 = run();
  const auto g2 = run();
  ASSERT_EQ(g1.size(), g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], g2[i]);
}

TEST(NoGrad, NothingIsRecorded) {
  auto x = random_tensor(Shape{1, 1, 2, 2}, 1).set_requires_grad(true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  {
    NoGradScope<double> off;
    relu(x);
  }
  EXPECT_EQ(tape.size(), 0u);
  relu(x);
  EXPECT_EQ(tape.size(), 1u);
}

TEST(Gradcheck, ClosedFormSquare) {
  Tensor<double> x(Shape{1, 1, 1, 3}, {1, 2, 3});
  const auto r = gradcheck([](const Tensor<double>& v) { return sum_all(mul(v, v)); }, x);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, 4, 6}));
}

// x² whose backward is doubled: a deliberately wrong rule.
Tensor<double> faulty_square(const Tensor<double>& x) {
  Tensor<double> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out.mutable_data()[i] = x.at(i) * x.at(i);
  if (detail::recording<double>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::record<double>("faulty_square", {px}, out, [px, po] {
      auto& g = px->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * (2.0 * px->data[i]) * po->grad[i];
    });
  }
  return out;
}

TEST(Gradcheck, FlagsInjectedFault) {
  // d/dx [x² + x²] = 4x; the faulty term reports 4x for its half, so the
  // analytic total is 6x and the relative error is |6 − 4| / 6 = 1/3.
  Tensor<double> x(Shape{1, 1, 1, 3}, {1, -2, 0.5});
  const auto r = gradcheck([](const Tensor<double>& v) { return sum_all(add(mul(v, v), faulty_square(v))); }, x);
  EXPECT_NEAR(r.max_rel_error, 1.0 / 3.0, 1e-6);
  EXPECT_FALSE(r.ok(1e-6));
}

TEST(Gradcheck, KinkTestSkipsOnlyNonSmoothCoordinates) {
  // 3e-6 sits inside the eps window of the ReLU kink; 0.7 and -0.4 do not.
  Tensor<double> x(Shape{1, 1, 1, 3}, {3e-6, 0.7, -0.4});
  const auto plain = gradcheck([&] { return sum_all(add(mul(x, x), relu(x))); }, {x});
  EXPECT_GT(plain.max_rel_error, 0.1);

  GradcheckOptions opts;
  opts.kink_tolerance = 1e-5;
  const auto guarded = gradcheck([&] { return sum_all(add(mul(x, x), relu(x))); }, {x}, opts);
  EXPECT_EQ(guarded.nonsmooth, 1u);
  EXPECT_TRUE(guarded.ok(1e-8)) << guarded.max_rel_error;

  Tensor<double> y(Shape{1, 1, 1, 3}, {1, -2, 0.5});
  const auto faulty =
      gradcheck([&] { return sum_all(add(mul(y, y), faulty_square(y))); }, {y}, opts);
  EXPECT_EQ(faulty.nonsmooth, 0u);
  EXPECT_FALSE(faulty.ok(1e-6));
}

TEST(Gradcheck, ReportsNonFiniteEvaluations) {
  Tensor<double> x(Shape{1, 1, 1, 2}, {1e308, 1.0});
  const auto r = gradcheck([](const Tensor<double>& v) { return sum_all(mul(v, v)); }, x);
  EXPECT_FALSE(r.failures.empty());
  EXPECT_EQ(r.failures[0].coordinate, 0u);
}

TEST(Gradcheck, CompositeOpsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_away_from_zero(Shape{2, 2, 3, 3}, seed);
    const auto r = gradcheck(
        [&] {
          auto h = relu(concat_channels(x, scale(x, -0.5)));
          auto t = reshape(permute(h, {0, 2, 3, 1}), Shape{1, 2, 9, 4});
          auto p = softmax_last(t);
          return weighted_sum(sigmoid(add(p, scale(p, 2.0))));
        },
        {x});
    EXPECT_TRUE(r.ok(1e-6)) << "seed " << seed << " err " << r.max_rel_error;
  }
}

}  // namespace
}  // namespace lpca
