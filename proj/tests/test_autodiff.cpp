#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cyclemon/autodiff.hpp"
#include "cyclemon/error.hpp"
#include "cyclemon/rng.hpp"

using namespace cyclemon;
using ad::Tensor;

TEST_CASE("tensor construction and grad plumbing") {
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.grad.empty());
  t.ensure_grad();
  CHECK(t.grad.size() == 6);
  t.grad[2] = 5;
  t.zero_grad();
  CHECK(t.grad[2] == 0.0);

  CHECK_THROWS_AS(Tensor::of({2, 2}, {1, 2, 3}), Error);
  const Tensor v = Tensor::of({3}, {1, 2, 3});
  CHECK(v.values[1] == 2.0);
}

TEST_CASE("conv2d: identity kernel, disjoint sums, strides") {
  {
    ad::Tape tape;
    const auto x = tape.value(Tensor::of({1, 1, 5}, {1, 2, 3, 4, 5}));
    const auto k = tape.value(Tensor::of({1, 1, 1, 1}, {1}));
    const auto b = tape.value(Tensor::of({1}, {0}));
    const auto y = tape.conv2d(x, k, b, 1, 1);
    CHECK(tape.val(y).values == std::vector<double>{1, 2, 3, 4, 5});
  }
  {
    ad::Tape tape;
    const auto x = tape.value(Tensor::of({1, 1, 6}, {1, 2, 3, 4, 5, 6}));
    const auto k = tape.value(Tensor::of({1, 1, 1, 3}, {1, 1, 1}));
    const auto b = tape.value(Tensor::of({1}, {0}));
    const auto y = tape.conv2d(x, k, b, 1, 3);
    REQUIRE(tape.val(y).shape == std::vector<std::size_t>{1, 1, 2});
    CHECK(tape.val(y).values == std::vector<double>{6, 15});
  }
  {
    // multi-channel cross-correlation with bias, checked by hand:
    // out(o, i, j) = b_o + sum_c sum_dy sum_dx x(c, i+dy, j*sw+dx) k(o, c, dy, dx)
    ad::Tape tape;
    const auto x = tape.value(Tensor::of({2, 2, 3}, {1, 2, 3,
                                                     4, 5, 6,
                                                     -1, 0, 1,
                                                     2, 2, 2}));
    const auto k = tape.value(
        Tensor::of({1, 2, 2, 2}, {1, 0, 0, 1, 2, 0, 0, -1}));
    const auto b = tape.value(Tensor::of({1}, {10}));
    const auto y = tape.conv2d(x, k, b, 1, 1);
    REQUIRE(tape.val(y).shape == std::vector<std::size_t>{1, 1, 2});
    // position 0: 1*1 + 5*1 + (-1)*2 + 2*(-1) = 2 -> 12
    // position 1: 2*1 + 6*1 + 0*2 + 2*(-1) = 6 -> 16
    CHECK(tape.val(y).values == std::vector<double>{12, 16});
  }

  ad::Tape tape;
  const auto x = tape.value(Tensor::zeros({1, 2, 4}));
  const auto k = tape.value(Tensor::zeros({1, 1, 3, 3}));
  const auto b = tape.value(Tensor::zeros({1}));
  CHECK_THROWS_AS(tape.conv2d(x, k, b, 1, 1), Error);  // kernel taller than x
  const auto k2 = tape.value(Tensor::zeros({1, 1, 2, 2}));
  CHECK_THROWS_AS(tape.conv2d(x, k2, b, 0, 1), Error);  // zero stride
}

TEST_CASE("dense identity and hand math") {
  ad::Tape tape;
  const auto x = tape.value(Tensor::of({3}, {7, 8, 9}));
  const auto w = tape.value(Tensor::of({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  const auto b = tape.value(Tensor::of({3}, {0, 0, 0}));
  const auto y = tape.dense(x, w, b);
  CHECK(tape.val(y).values == std::vector<double>{7, 8, 9});

  const auto w2 = tape.value(Tensor::of({2, 3}, {1, 2, 3, 4, 5, 6}));
  const auto b2 = tape.value(Tensor::of({2}, {0.5, -0.5}));
  const auto y2 = tape.dense(x, w2, b2);
  CHECK(tape.val(y2).values == std::vector<double>{7 + 16 + 27 + 0.5,
                                                   28 + 40 + 54 - 0.5});
}

TEST_CASE("relu, flatten, concat forward semantics") {
  ad::Tape tape;
  const auto x = tape.value(Tensor::of({4}, {-2, 0, 0.5, 3}));
  const auto r = tape.relu(x);
  CHECK(tape.val(r).values == std::vector<double>{0, 0, 0.5, 3});

  const auto m = tape.value(Tensor::of({2, 2}, {1, 2, 3, 4}));
  const auto f = tape.flatten(m);
  CHECK(tape.val(f).shape == std::vector<std::size_t>{4});
  CHECK(tape.val(f).values == std::vector<double>{1, 2, 3, 4});

  const auto a = tape.value(Tensor::of({2}, {1, 2}));
  const auto c = tape.concat({a, f});
  CHECK(tape.val(c).values == std::vector<double>{1, 2, 1, 2, 3, 4});
  CHECK_THROWS_AS(tape.concat({}), Error);
}

TEST_CASE("dropout: inverted scaling, eval identity, rate validation") {
  Rng rng(5);
  ad::Tape tape;
  Tensor big = Tensor::zeros({2000});
  for (double& v : big.values) v = 1.0;
  const auto x = tape.value(big);

  const double rate = 0.4;
  const auto d = tape.dropout(x, rate, rng, true);
  const auto& out = tape.val(d).values;
  std::size_t zeros = 0;
  for (double v : out) {
    if (v == 0.0)
      ++zeros;
    else
      CHECK(v == doctest::Approx(1.0 / (1.0 - rate)).epsilon(1e-12));
  }
  // Monte Carlo: ~40% dropped
  CHECK(static_cast<double>(zeros) / 2000.0 ==
        doctest::Approx(rate).epsilon(0.1));

  const auto e = tape.dropout(x, rate, rng, false);
  CHECK(tape.val(e).values == tape.val(x).values);

  const auto z = tape.dropout(x, 0.0, rng, true);
  CHECK(tape.val(z).values == tape.val(x).values);

  CHECK_THROWS_AS(tape.dropout(x, 1.0, rng, true), Error);
  CHECK_THROWS_AS(tape.dropout(x, -0.1, rng, true), Error);
}

TEST_CASE("softmax cross-entropy: uniform, stability, gradient formula") {
  {
    ad::Tape tape;
    const auto l = tape.value(Tensor::of({4}, {3, 3, 3, 3}));
    const auto loss = tape.softmax_cross_entropy(l, 2);
    CHECK(tape.val(loss).values[0] ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  {
    // +1000 on the target must neither overflow nor lose the answer
    ad::Tape tape;
    const auto l = tape.value(Tensor::of({4}, {1002, 2, 2, 2}));
    const auto loss = tape.softmax_cross_entropy(l, 0);
    CHECK(tape.val(loss).values[0] >= 0.0);
    CHECK(tape.val(loss).values[0] < 1e-9);
  }
  {
    // gradient = softmax - onehot
    ad::Tape tape;
    Tensor logits = Tensor::of({3}, {0.2, -1.0, 0.7});
    const auto l = tape.value(logits, true);
    const auto loss = tape.softmax_cross_entropy(l, 1);
    tape.backward(loss);
    double z = 0;
    for (double v : logits.values) z += std::exp(v);
    const auto& g = tape.grad(l);
    for (int i = 0; i < 3; ++i) {
      const double p = std::exp(logits.values[i]) / z;
      CHECK(g[i] == doctest::Approx(p - (i == 1 ? 1 : 0)).epsilon(1e-12));
    }
  }
  ad::Tape tape;
  const auto l = tape.value(Tensor::of({3}, {1, 2, 3}));
  CHECK_THROWS_AS(tape.softmax_cross_entropy(l, 3), Error);
  CHECK_THROWS_AS(tape.softmax_cross_entropy(l, -1), Error);
}

TEST_CASE("backward accumulates into external params across passes") {
  Tensor w = Tensor::of({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::of({2}, {0, 0});
  w.ensure_grad();
  b.ensure_grad();
  for (int pass = 0; pass < 2; ++pass) {
    ad::Tape tape;
    const auto x = tape.value(Tensor::of({2}, {1, 1}));
    const auto y = tape.dense(x, tape.param(&w), tape.param(&b));
    const auto loss = tape.softmax_cross_entropy(y, 0);
    tape.backward(loss);
  }
  // two identical passes double the single-pass gradient
  Tensor w2 = w, b2 = b;
  w2.zero_grad();
  b2.zero_grad();
  {
    ad::Tape tape;
    const auto x = tape.value(Tensor::of({2}, {1, 1}));
    const auto y = tape.dense(x, tape.param(&w2), tape.param(&b2));
    const auto loss = tape.softmax_cross_entropy(y, 0);
    tape.backward(loss);
  }
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(w.grad[i] == doctest::Approx(2.0 * w2.grad[i]).epsilon(1e-12));
}

TEST_CASE("finite differences over random op chains") {
  Rng shape_rng(404);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t cin = 1 + shape_rng.below(3);
    const std::size_t cout = 1 + shape_rng.below(3);
    const std::size_t h = 1 + shape_rng.below(3);
    const std::size_t w = 6 + shape_rng.below(10);
    const std::size_t kh = 1 + shape_rng.below(h);
    const std::size_t kw = 2 + shape_rng.below(4);
    const std::size_t sw = 1 + shape_rng.below(3);

    Tensor x = Tensor::zeros({cin, h, w});
    Tensor k = Tensor::zeros({cout, cin, kh, kw});
    Tensor kb = Tensor::zeros({cout});
    Rng fill(1000 + static_cast<std::uint64_t>(rep));
    for (Tensor* t : {&x, &k, &kb})
      for (double& v : t->values) v = fill.uniform(-1.0, 1.0);

    const std::size_t oh = (h - kh) / 1 + 1;
    const std::size_t ow = (w - kw) / sw + 1;
    const std::size_t flat = cout * oh * ow;
    Tensor dw = Tensor::zeros({3, flat});
    Tensor db = Tensor::zeros({3});
    for (double& v : dw.values) v = fill.uniform(-1.0, 1.0);

    auto run = [&](bool with_grad) {
      ad::Tape tape;
      const auto xi = tape.param(&x);
      const auto ki = tape.param(&k);
      const auto bi = tape.param(&kb);
      const auto conv = tape.conv2d(xi, ki, bi, 1, sw);
      const auto f = tape.flatten(conv);
      const auto den = tape.dense(f, tape.param(&dw), tape.param(&db));
      const auto loss = tape.softmax_cross_entropy(den, 1);
      if (with_grad) tape.backward(loss);
      return tape.val(loss).values[0];
    };

    const ad::GradCheckReport rep2 = ad::grad_check(
        run, {{"x", &x}, {"k", &k}, {"kb", &kb}, {"dw", &dw}, {"db", &db}});
    INFO("chain rep ", rep, " worst ", rep2.worst);
    REQUIRE(rep2.pass);
  }
}

TEST_CASE("grad_check flags a corrupted backward") {
  // mutation test: a deliberately wrong gradient must be reported
  Tensor w = Tensor::of({3}, {0.3, -0.2, 0.9});
  auto run = [&](bool with_grad) {
    double loss = 0;
    for (double v : w.values) loss += v * v;
    if (with_grad) {
      w.ensure_grad();
      for (std::size_t i = 0; i < 3; ++i)
        w.grad[i] += 2.0 * w.values[i] * (i == 1 ? 0.5 : 1.0);  // wrong at [1]
    }
    return loss;
  };
  const ad::GradCheckReport rep = ad::grad_check(run, {{"w", &w}});
  CHECK_FALSE(rep.pass);
  CHECK(rep.worst == "w[1]");
  CHECK(rep.max_rel_error > 0.1);
}

TEST_CASE("adam: zero grad is a no-op, constant grad approaches lr steps") {
  {
    Tensor p = Tensor::of({3}, {1, 2, 3});
    p.ensure_grad();
    ad::Adam opt({&p}, {0.01, 0.9, 0.999, 1e-8});
    opt.step();
    CHECK(p.values == std::vector<double>{1, 2, 3});
  }
  {
    // constant gradient: |update| -> lr as bias correction settles
    Tensor p = Tensor::of({1}, {0.0});
    p.ensure_grad();
    ad::Adam opt({&p}, {0.01, 0.9, 0.999, 1e-8});
    double prev = p.values[0];
    double last_step = 0;
    for (int t = 0; t < 400; ++t) {
      p.grad[0] = 2.5;
      opt.step();
      last_step = prev - p.values[0];
      prev = p.values[0];
    }
    CHECK(last_step == doctest::Approx(0.01).epsilon(0.02));
    CHECK(opt.steps() == 400);
  }
  {
    // first step from zero state: update = -lr * g / (sqrt(g^2) + eps') ~ -lr*sign(g)
    Tensor p = Tensor::of({2}, {0.0, 0.0});
    p.ensure_grad();
    p.grad[0] = 0.7;
    p.grad[1] = -0.7;
    ad::Adam opt({&p}, {0.001, 0.9, 0.999, 1e-8});
    opt.step();
    CHECK(p.values[0] == doctest::Approx(-0.001).epsilon(1e-4));
    CHECK(p.values[1] == doctest::Approx(0.001).epsilon(1e-4));
  }
  {
    Tensor p = Tensor::of({2}, {1, 1});  // grads never allocated
    ad::Adam opt({&p});
    CHECK_THROWS_AS(opt.step(), Error);
  }
}

TEST_CASE("set_lr changes subsequent steps") {
  Tensor p = Tensor::of({1}, {0.0});
  p.ensure_grad();
  ad::Adam opt({&p}, {0.1, 0.9, 0.999, 1e-8});
  CHECK(opt.lr() == 0.1);
  opt.set_lr(0.01);
  CHECK(opt.lr() == 0.01);
  p.grad[0] = 1.0;
  opt.step();
  CHECK(std::fabs(p.values[0]) < 0.02);  // moved by ~new lr, not old
}

TEST_CASE("backward requires a scalar root") {
  ad::Tape tape;
  const auto x = tape.value(Tensor::of({2}, {1, 2}), true);
  CHECK_THROWS_AS(tape.backward(x), Error);
}
