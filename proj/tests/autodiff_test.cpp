#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "op_checks.hpp"
#include "simsiam/gradcheck.hpp"
#include "simsiam/ops.hpp"

using namespace simsiam;
using simsiam_tests::rand_tensor;

TEST_CASE("l2_normalize: 3-4-5 triangle") {
  Tape<double> t;
  auto v = t.constant(Tensor<double>::row({3.0, 4.0}));
  auto y = l2_normalize(v);
  CHECK(y.value().flat()[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(y.value().flat()[1] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("l2_normalize: unit norm property and zero-vector guard") {
  SplitRng rng(11);
  for (int rep = 0; rep < 25; ++rep) {
    Tape<double> t;
    auto x = t.constant(rand_tensor({4, 7}, rng, -2.0, 2.0));
    auto y = l2_normalize(x);
    for (Index r = 0; r < 4; ++r)
      CHECK(std::abs(y.value().mat().row(r).norm() - 1.0) < 1e-6);
  }
  Tape<double> t;
  auto zero = t.constant(Tensor<double>::zeros({1, 5}));
  auto y = l2_normalize(zero);
  CHECK(y.value().flat().abs().maxCoeff() == 0.0);
}

TEST_CASE("relu: definition") {
  Tape<double> t;
  auto y = relu(t.constant(Tensor<double>::row({-1.0, 0.0, 2.0})));
  CHECK(y.value().flat()[0] == 0.0);
  CHECK(y.value().flat()[1] == 0.0);
  CHECK(y.value().flat()[2] == 2.0);
}

TEST_CASE("batchnorm: hand-computed two-sample batch") {
  // batch {(1),(3)}: mu = 2, biased var = 1 -> xhat = +-1/sqrt(1 + 1e-5)
  Tape<double> t;
  BatchNormState<double> state(1);
  auto x = t.constant(Tensor<double>::from_rows({{1.0}, {3.0}}));
  auto g = t.constant(Tensor<double>::ones({1}));
  auto b = t.constant(Tensor<double>::zeros({1}));
  auto y = batchnorm(x, g, b, state, Mode::train);
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(y.value().flat()[0] == doctest::Approx(-expect).epsilon(1e-12));
  CHECK(y.value().flat()[1] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(y.value().flat()[0] == doctest::Approx(-1.0).epsilon(1e-4));

  // Running statistics: mean <- 0.9*0 + 0.1*2, var <- 0.9*1 + 0.1*2 (unbiased var = 2).
  CHECK(state.running_mean.flat()[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(state.running_var.flat()[0] == doctest::Approx(1.1).epsilon(1e-12));
}

TEST_CASE("batchnorm: eval mode leaves running statistics untouched") {
  Tape<double> t;
  BatchNormState<double> state(2);
  state.running_mean = Tensor<double>::row({0.5, -0.5});
  state.running_var = Tensor<double>::row({2.0, 0.5});
  const Tensor<double> rm = state.running_mean, rv = state.running_var;
  auto x = t.constant(Tensor<double>::from_rows({{1.0, 1.0}, {2.0, 0.0}}));
  auto y = batchnorm(x, state, Mode::eval);
  CHECK(bitwise_equal(state.running_mean, rm));
  CHECK(bitwise_equal(state.running_var, rv));
  CHECK(y.value().flat()[0] ==
        doctest::Approx((1.0 - 0.5) / std::sqrt(2.0 + 1e-5)).epsilon(1e-12));
}

TEST_CASE("batchnorm: train mode rejects batch of one") {
  Tape<double> t;
  BatchNormState<double> state(3);
  auto x = t.constant(Tensor<double>::from_rows({{1.0, 2.0, 3.0}}));
  CHECK_THROWS_AS(batchnorm(x, state, Mode::train), std::invalid_argument);
}

TEST_CASE("shape mismatch raises ShapeError") {
  Tape<double> t;
  auto a = t.constant(Tensor<double>::zeros({2, 3}));
  auto b = t.constant(Tensor<double>::zeros({3, 2}));
  CHECK_THROWS_AS(a + b, ShapeError);
  CHECK_THROWS_AS(affine(a, b, b), ShapeError);
}

TEST_CASE("non-finite forward output raises NonFiniteError") {
  Tape<double> t;
  Tensor<double> bad = Tensor<double>::row({1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(t.constant(bad), NonFiniteError);
  auto x = t.constant(Tensor<double>::row({-1.0, 2.0}));
  CHECK_THROWS_AS(log(x), NonFiniteError);  // log(-1) = NaN
}

TEST_CASE("stop_gradient: forward identity is bit-exact") {
  SplitRng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Tape<double> t;
    Tensor<double> v = rand_tensor({3, 5}, rng, -100.0, 100.0);
    auto y = stop_gradient(t.constant(v));
    CHECK(bitwise_equal(y.value(), v));
  }
}

TEST_CASE("stop_gradient: product rule with one factor constant") {
  // loss = sum(w * sg(w)) -> dloss/dw = sg(w) values, not 2w.
  Tape<double> t;
  Tensor<double> wv = Tensor<double>::row({1.5, -2.0, 0.25});
  Parameter<double> w{"w", wv};
  auto wvar = t.param(w);
  auto loss = sum(wvar * stop_gradient(wvar));
  auto grads = t.backward(loss);
  CHECK(bitwise_equal(grads.at(wvar), wv));
}

TEST_CASE("stop_gradient: fully blocked path gives zero gradient") {
  Tape<double> t;
  Parameter<double> w{"w", Tensor<double>::row({1.0, 2.0, 3.0})};
  auto wvar = t.param(w);
  auto loss = sum(stop_gradient(wvar));
  auto grads = t.backward(loss);
  CHECK(grads.at(wvar).flat().abs().maxCoeff() == 0.0);
}

TEST_CASE("backward: linear function gradient") {
  // loss = mean(w * x), fixed x -> grad(w) = x / n.
  Tape<double> t;
  Tensor<double> xv = Tensor<double>::from_rows({{1.0, -2.0}, {3.0, 0.5}});
  Parameter<double> w{"w", Tensor<double>::ones({2, 2})};
  auto wvar = t.param(w);
  auto loss = mean(wvar * t.constant(xv));
  auto grads = t.backward(loss);
  for (Index i = 0; i < 4; ++i)
    CHECK(grads.at(wvar).flat()[i] == doctest::Approx(xv.flat()[i] / 4.0).epsilon(1e-15));
}

TEST_CASE("backward: loss must be scalar") {
  Tape<double> t;
  Parameter<double> w{"w", Tensor<double>::ones({2, 2})};
  auto wvar = t.param(w);
  auto y = relu(wvar);
  CHECK_THROWS_AS(t.backward(y), ShapeError);
}

TEST_CASE("backward: two-layer relu MLP matches finite differences") {
  SplitRng rng(42);
  Tensor<double> x = rand_tensor({4, 3}, rng);
  Tensor<double> w1 = rand_tensor({3, 5}, rng);
  Tensor<double> b1 = rand_tensor({5}, rng);
  Tensor<double> w2 = rand_tensor({5, 2}, rng);
  Tensor<double> b2 = rand_tensor({2}, rng);
  Tensor<double> target = rand_tensor({4, 2}, rng);
  auto build = [target](Tape<double>& t, const std::vector<Var<double>>& in) {
    auto h = relu(affine(in[0], in[1], in[2]));
    auto y = affine(h, in[3], in[4]);
    auto d = y - t.constant(target);
    return mean(d * d);
  };
  const double err = grad_check(build, {x, w1, b1, w2, b2}, 1e-6);
  CHECK(err < 1e-5);
}

TEST_CASE("backward: symmetric loss receives contributions from both terms") {
  // Shared one-layer encoder applied to two inputs; symmetric loss
  // 0.5*D(z1, sg(z2)) + 0.5*D(z2, sg(z1)) with D = mean squared difference.
  // Oracle: run the two asymmetric halves on separate tapes and sum.
  SplitRng rng(5);
  Tensor<double> x1 = rand_tensor({3, 4}, rng);
  Tensor<double> x2 = rand_tensor({3, 4}, rng);
  Tensor<double> wv = rand_tensor({4, 4}, rng);
  Tensor<double> bv = rand_tensor({4}, rng);

  auto asym = [&](const Tensor<double>& a, const Tensor<double>& b, Tensor<double>* gw,
                  Tensor<double>* gb) {
    Tape<double> t;
    Parameter<double> w{"w", wv}, bias{"b", bv};
    auto wvar = t.param(w);
    auto bvar = t.param(bias);
    auto za = affine(t.constant(a), wvar, bvar);
    auto zb = affine(t.constant(b), wvar, bvar);
    auto d = za - stop_gradient(zb);
    auto grads = t.backward(mean(d * d));
    *gw = grads.at(wvar);
    *gb = grads.at(bvar);
  };

  Tensor<double> gw12, gb12, gw21, gb21;
  asym(x1, x2, &gw12, &gb12);
  asym(x2, x1, &gw21, &gb21);

  Tape<double> t;
  Parameter<double> w{"w", wv}, bias{"b", bv};
  auto wvar = t.param(w);
  auto bvar = t.param(bias);
  auto z1 = affine(t.constant(x1), wvar, bvar);
  auto z2 = affine(t.constant(x2), wvar, bvar);
  auto d1 = z1 - stop_gradient(z2);
  auto d2 = z2 - stop_gradient(z1);
  auto loss = scale(mean(d1 * d1) + mean(d2 * d2), 0.5);
  auto grads = t.backward(loss);

  Tensor<double> expect_w(gw12.shape(), 0.5 * (gw12.flat() + gw21.flat()));
  Tensor<double> expect_b(gb12.shape(), 0.5 * (gb12.flat() + gb21.flat()));
  CHECK(max_abs_diff(grads.at(wvar), expect_w) < 1e-14);
  CHECK(max_abs_diff(grads.at(bvar), expect_b) < 1e-14);
  // Both halves genuinely contribute: each asymmetric gradient is nonzero.
  CHECK(gw12.flat().abs().maxCoeff() > 0.0);
  CHECK(gw21.flat().abs().maxCoeff() > 0.0);
}

TEST_CASE("backward: deterministic for a fixed tape") {
  SplitRng rng(9);
  Tensor<double> x = rand_tensor({4, 3}, rng);
  Tensor<double> wv = rand_tensor({3, 3}, rng);
  auto run = [&]() {
    Tape<double> t;
    Parameter<double> w{"w", wv};
    auto wvar = t.param(w);
    auto y = softmax(affine(t.constant(x), wvar, t.constant(Tensor<double>::zeros({3}))));
    auto grads = t.backward(sum(l2_normalize(y) * y));
    return grads.at(wvar);
  };
  CHECK(bitwise_equal(run(), run()));
}

TEST_CASE("backward is linear in the loss") {
  SplitRng rng(13);
  Tensor<double> x = rand_tensor({3, 4}, rng);
  Tensor<double> wv = rand_tensor({4, 4}, rng);
  const double a = 1.7, b = -0.4;

  auto grads_for = [&](double ca, double cb) {
    Tape<double> t;
    Parameter<double> w{"w", wv};
    auto wvar = t.param(w);
    auto z = affine(t.constant(x), wvar, t.constant(Tensor<double>::zeros({4})));
    auto l1 = mean(z * z);
    auto l2 = sum(l2_normalize(z));
    auto grads = t.backward(scale(l1, ca) + scale(l2, cb));
    return grads.at(wvar);
  };

  Tensor<double> g_combo = grads_for(a, b);
  Tensor<double> g1 = grads_for(1.0, 0.0);
  Tensor<double> g2 = grads_for(0.0, 1.0);
  for (Index i = 0; i < g_combo.numel(); ++i) {
    const double lhs = g_combo.flat()[i];
    const double rhs = a * g1.flat()[i] + b * g2.flat()[i];
    const double denom = std::max({std::abs(lhs), std::abs(rhs), 1e-12});
    CHECK(std::abs(lhs - rhs) / denom < 1e-12);
  }
}

TEST_CASE("GradStore: every requires-grad leaf appears exactly once") {
  Tape<double> t;
  Parameter<double> used{"used", Tensor<double>::ones({2})};
  Parameter<double> untouched{"untouched", Tensor<double>::ones({3})};
  Parameter<double> frozen{"frozen", Tensor<double>::ones({2})};
  frozen.trainable = false;
  auto u = t.param(used);
  auto n = t.param(untouched);
  auto f = t.param(frozen);
  auto loss = sum(u * f);
  auto grads = t.backward(loss);
  CHECK(grads.size() == 2);  // used + untouched (zero-filled); frozen absent
  CHECK(grads.contains(u));
  CHECK(grads.contains(n));
  CHECK(!grads.contains(f));
  CHECK(grads.at(n).flat().abs().maxCoeff() == 0.0);
  CHECK(grads.at(n).shape() == untouched.value.shape());
}

TEST_CASE("grad_check: every differentiable op kind under 1e-5") {
  for (auto& check : simsiam_tests::make_op_checks()) {
    CAPTURE(check.name);
    const double err = grad_check(check.build, check.inputs, 1e-6);
    CHECK_MESSAGE(err < 1e-5, check.name, " max rel error ", err);
  }
}

TEST_CASE("grad_check: rejects non-positive step") {
  auto build = [](Tape<double>&, const std::vector<Var<double>>& in) { return sum(in[0]); };
  CHECK_THROWS_AS(grad_check(build, {Tensor<double>::ones({2})}, 0.0), std::invalid_argument);
}

TEST_CASE("concat_rows: values and trailing-dim validation") {
  Tape<double> t;
  auto a = t.constant(Tensor<double>::from_rows({{1.0, 2.0}}));
  auto b = t.constant(Tensor<double>::from_rows({{3.0, 4.0}, {5.0, 6.0}}));
  auto c = concat_rows(a, b);
  CHECK(c.shape() == Shape{3, 2});
  CHECK(c.value().flat()[4] == 5.0);
  auto bad = t.constant(Tensor<double>::zeros({2, 3}));
  CHECK_THROWS_AS(concat_rows(a, bad), ShapeError);
}
