#include <doctest.h>

#include "sewhar/error.hpp"
#include "sewhar/nn/adam.hpp"
#include "sewhar/nn/grad_check.hpp"
#include "sewhar/nn/layers.hpp"
#include "sewhar/nn/loss.hpp"
#include "sewhar/nn/sequential.hpp"

#include <cmath>

using namespace sewhar;
using namespace sewhar::nn;

namespace {

Tensor<double> row(std::vector<double> v, Shape shape) { return Tensor<double>(std::move(shape), std::move(v)); }

Tensor<double> random_tensor(Shape shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

Tensor<double> random_tokens(std::size_t b, std::size_t t, std::size_t vocab, Rng& rng) {
  Tensor<double> out({b, t});
  for (auto& v : out.values()) v = static_cast<double>(rng.below(vocab + 1));
  return out;
}

void check_close(const Tensor<double>& a, const Tensor<double>& b, double tol) {
  REQUIRE(a.shape() == b.shape());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  CHECK(worst <= tol);
}

}  // namespace

TEST_CASE("embedding lookup and gradient") {
  Embedding<double> emb(1, 2);
  emb.table().value = row({0, 0, 0.5, -1}, {2, 2});
  const auto out = emb.forward(row({1}, {1, 1}), Mode::Train);
  CHECK(out.shape() == Shape{1, 1, 2});
  CHECK(out[0] == 0.5);
  CHECK(out[1] == -1);

  const auto zeros = emb.forward(row({0, 0}, {1, 2}), Mode::Train);
  for (auto v : zeros.values()) CHECK(v == 0.0);

  emb.forward(row({1, 1}, {1, 2}), Mode::Train);
  emb.table().grad.fill(0);
  emb.backward(Tensor<double>({1, 2, 2}, 1.0));
  CHECK(emb.table().grad[2] == 2.0);
  CHECK(emb.table().grad[3] == 2.0);
  CHECK(emb.table().grad[0] == 0.0);

  CHECK_THROWS_AS(emb.forward(row({2}, {1, 1}), Mode::Train), TokenOutOfRange);
}

TEST_CASE("one-hot") {
  OneHot<double> oh(3);
  const auto out = oh.forward(row({2, 0}, {1, 2}), Mode::Train);
  CHECK(out.shape() == Shape{1, 2, 4});
  CHECK(out.to_vector() == std::vector<double>{0, 0, 1, 0, 1, 0, 0, 0});
}

TEST_CASE("conv1d") {
  const auto x = row({1, 2, 3}, {1, 3, 1});
  Conv1D<double> k1(1, 1, 1);
  k1.kernel().value = row({2}, {1, 1, 1});
  CHECK(k1.forward(x, Mode::Train).to_vector() == std::vector<double>{2, 4, 6});

  Conv1D<double> k3(1, 1, 3);
  k3.kernel().value = row({1, 1, 1}, {3, 1, 1});
  CHECK(k3.forward(x, Mode::Train).to_vector() == std::vector<double>{3, 6, 5});

  Conv1D<double> zero(1, 1, 3);
  zero.bias().value = row({1.5}, {1});
  CHECK(zero.forward(x, Mode::Train).to_vector() == std::vector<double>{1.5, 1.5, 1.5});

  // even kernel: one extra pad on the left
  Conv1D<double> k2(1, 1, 2);
  k2.kernel().value = row({1, 10}, {2, 1, 1});
  CHECK(k2.forward(x, Mode::Train).to_vector() == std::vector<double>{10, 21, 32});

  CHECK_THROWS_AS(k3.forward(row({1, 2}, {1, 1, 2}), Mode::Train), ShapeMismatch);
}

TEST_CASE("batchnorm train mode standardizes") {
  BatchNorm<double> bn(1, 0.0);
  const auto two = bn.forward(row({1, 3}, {1, 2, 1}), Mode::Train);
  CHECK(two[0] == doctest::Approx(-1.0));
  CHECK(two[1] == doctest::Approx(1.0));

  Rng rng(3);
  BatchNorm<double> bn3(3);
  const auto x = random_tensor({4, 10, 3}, rng);
  const auto y = bn3.forward(x, Mode::Train);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0, sq = 0;
    for (std::size_t i = c; i < y.size(); i += 3) mean += y[i];
    mean /= 40;
    for (std::size_t i = c; i < y.size(); i += 3) sq += (y[i] - mean) * (y[i] - mean);
    CHECK(std::abs(mean) < 1e-6);
    // epsilon 1e-3 shrinks the variance slightly below 1
    CHECK(sq / 40 == doctest::Approx(1.0).epsilon(0.01));
  }

  BatchNorm<double> affine(1, 0.0);
  affine.gamma().value = row({2}, {1});
  affine.beta().value = row({5}, {1});
  const auto z = affine.forward(row({-1, 1}, {1, 2, 1}), Mode::Train);
  CHECK(z[0] == doctest::Approx(3.0));
  CHECK(z[1] == doctest::Approx(7.0));

  CHECK_THROWS_AS(bn.forward(row({1}, {1, 1, 1}), Mode::Train), DegenerateBatch);
}

TEST_CASE("batchnorm running statistics") {
  BatchNorm<double> bn(1, 0.0, 0.9);
  CHECK(bn.updates() == 0);
  bn.forward(row({1, 3}, {1, 2, 1}), Mode::Train);
  // the first update adopts the batch statistics
  CHECK(bn.updates() == 1);
  CHECK(bn.running_mean()[0] == doctest::Approx(2.0));
  CHECK(bn.running_var()[0] == doctest::Approx(1.0));
  bn.forward(row({5, 7}, {1, 2, 1}), Mode::Train);
  CHECK(bn.running_mean()[0] == doctest::Approx(0.9 * 2 + 0.1 * 6));
  CHECK(bn.running_var()[0] == doctest::Approx(1.0));

  // frozen mode leaves them alone, infer mode uses them
  bn.forward(row({100, 300}, {1, 2, 1}), Mode::TrainFrozen);
  CHECK(bn.updates() == 2);
  const auto y = bn.forward(row({2.4}, {1, 1, 1}), Mode::Infer);
  CHECK(y[0] == doctest::Approx(0.0));
}

TEST_CASE("relu and gap") {
  ReLU<double> relu;
  CHECK(relu.forward(row({-1, 0, 2}, {3}), Mode::Train).to_vector() == std::vector<double>{0, 0, 2});
  CHECK(relu.backward(row({5, 5, 5}, {3})).to_vector() == std::vector<double>{0, 0, 5});

  GlobalAvgPool<double> gap;
  const auto g = gap.forward(row({1, 10, 2, 20, 3, 30}, {1, 3, 2}), Mode::Train);
  CHECK(g.shape() == Shape{1, 2});
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(20.0));
  const auto back = gap.backward(row({3, 6}, {1, 2}));
  CHECK(back.to_vector() == std::vector<double>{1, 2, 1, 2, 1, 2});
}

TEST_CASE("softmax and cross-entropy") {
  const auto p = softmax(row({0, 0}, {1, 2}));
  CHECK(p[0] == doctest::Approx(0.5));

  const std::vector<int> target = {0};
  const auto ce = softmax_cross_entropy(row({std::log(3.0), 0}, {1, 2}), target);
  CHECK(ce.loss == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
  CHECK(ce.loss == doctest::Approx(0.28768).epsilon(1e-5));
  CHECK(ce.grad_logits[0] == doctest::Approx(-0.25));
  CHECK(ce.grad_logits[1] == doctest::Approx(0.25));

  Rng rng(9);
  const auto big = softmax(random_tensor({5, 7}, rng));
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 7; ++c) s += big[r * 7 + c];
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  // large logits stay finite
  const auto huge = softmax(row({1000, 0}, {1, 2}));
  CHECK(huge[0] == 1.0);

  const std::vector<int> bad = {2};
  CHECK_THROWS_AS(softmax_cross_entropy(row({0, 0}, {1, 2}), bad), TargetOutOfRange);
}

TEST_CASE("lstm") {
  Rng rng(1);
  LSTM<double> zero(3, 4);
  for (auto* p : zero.params()) p->value.fill(0);
  const auto h = zero.forward(random_tensor({2, 5, 3}, rng), Mode::Train);
  CHECK(h.shape() == Shape{2, 4});
  for (auto v : h.values()) CHECK(v == 0.0);

  // one step with hand-set gates (order i, f, g, o): c = i g, h = o tanh(c)
  LSTM<double> one(1, 1);
  one.input_weight().value = row({0.5, -0.3, 1.0, 0.8}, {1, 4});
  one.recurrent_weight().value = row({9, 9, 9, 9}, {1, 4});  // unused at t=1
  one.bias().value.fill(0);
  const auto h1 = one.forward(row({1}, {1, 1, 1}), Mode::Train);
  CHECK(h1[0] == doctest::Approx(0.3046064796976855).epsilon(1e-12));
}

TEST_CASE("adam") {
  Param<double> p("w", {2});
  p.value = row({1.0, -2.0}, {2});
  p.grad = row({0.5, -0.001}, {2});
  Adam<double> adam(AdamConfig{});
  std::vector<Param<double>*> ps = {&p};
  adam.step(ps);
  CHECK(adam.steps() == 1);
  // first step: m_hat = g, v_hat = g^2, so the move is lr * sign(g)
  CHECK(p.value[0] == doctest::Approx(1.0 - 1e-3 * 0.5 / (0.5 + 1e-7)).epsilon(1e-12));
  CHECK(p.value[1] == doctest::Approx(-2.0 + 1e-3 * 0.001 / (0.001 + 1e-7)).epsilon(1e-12));

  Param<double> q("q", {1});
  q.value = row({3.0}, {1});
  Adam<double> still(AdamConfig{});
  std::vector<Param<double>*> qs = {&q};
  still.step(qs);
  CHECK(q.value[0] == 3.0);
  CHECK(still.steps() == 1);

  // two independent parameters in one call == two separate optimizers
  Param<double> a("a", {1}), b("b", {1}), a2("a", {1}), b2("b", {1});
  Adam<double> joint, sa, sb;
  for (int step = 0; step < 3; ++step) {
    for (auto* x : {&a, &b, &a2, &b2}) x->grad = row({0.3 * (step + 1)}, {1});
    b.grad[0] = b2.grad[0] = -0.7;
    std::vector<Param<double>*> both = {&a, &b};
    joint.step(both);
    std::vector<Param<double>*> x1 = {&a2}, x2 = {&b2};
    sa.step(x1);
    sb.step(x2);
  }
  CHECK(a.value[0] == a2.value[0]);
  CHECK(b.value[0] == b2.value[0]);
}

TEST_CASE("token conv matches embedding followed by conv1d") {
  for (std::size_t dim : {std::size_t{0}, std::size_t{4}}) {
    for (std::size_t k : {std::size_t{3}, std::size_t{8}}) {
      CAPTURE(dim);
      CAPTURE(k);
      const std::size_t vocab = 9;
      Sequential<double> ref;
      if (dim > 0) {
        ref.add(std::make_unique<Embedding<double>>(vocab, dim));
        ref.add(std::make_unique<Conv1D<double>>(dim, 5, k));
      } else {
        ref.add(std::make_unique<OneHot<double>>(vocab));
        ref.add(std::make_unique<Conv1D<double>>(vocab + 1, 5, k));
      }
      Sequential<double> fused;
      fused.add(std::make_unique<TokenConv1D<double>>(vocab, dim, 5, k));
      Rng r1(11), r2(11);
      ref.initialize(r1);
      fused.initialize(r2);
      // non-zero bias so it takes part
      for (auto* p : ref.params()) if (p->name == "bias") p->value.fill(0.25);
      for (auto* p : fused.params()) if (p->name == "bias") p->value.fill(0.25);

      Rng rng(5);
      const auto tokens = random_tokens(3, 11, vocab, rng);
      const auto a = ref.forward(tokens, Mode::Train);
      const auto b = fused.forward(tokens, Mode::Train);
      check_close(a, b, 1e-12);

      const auto g = random_tensor(a.shape(), rng);
      ref.zero_grad();
      fused.zero_grad();
      ref.backward(g);
      fused.backward(g);
      const auto pa = ref.params();
      const auto pb = fused.params();
      REQUIRE(pa.size() == pb.size());
      for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->value == pb[i]->value);
        check_close(pa[i]->grad, pb[i]->grad, 1e-12);
      }
    }
  }
}

TEST_CASE("gradient checker") {
  // linear model with a quadratic loss
  Sequential<double> net;
  net.add(std::make_unique<Dense<double>>(3, 2));
  Rng rng(2);
  net.initialize(rng);
  const Objective quadratic = [](const Tensor<double>& out) {
    double loss = 0;
    Tensor<double> grad(out.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
      loss += 0.5 * out[i] * out[i];
      grad[i] = out[i];
    }
    return std::make_pair(loss, grad);
  };
  const auto report = grad_check(net, random_tensor({4, 3}, rng), quadratic);
  CHECK(report.max_rel_error < 1e-9);
  CHECK(report.entries.size() == 3);

  Sequential<double> broken;
  broken.add(std::make_unique<CorruptedBackward<double>>(std::make_unique<Dense<double>>(3, 2), 1.5));
  broken.initialize(rng);
  CHECK(grad_check(broken, random_tensor({4, 3}, rng), quadratic).max_rel_error > 1e-2);

  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("sequential copies are deep") {
  Sequential<double> net;
  net.add(std::make_unique<Dense<double>>(2, 2));
  Rng rng(4);
  net.initialize(rng);
  Sequential<double> copy = net;
  copy.params()[0]->value.fill(7);
  CHECK(net.params()[0]->value[0] != 7);
  CHECK(net.parameter_count() == 6);
}
