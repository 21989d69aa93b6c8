#include <doctest.h>

#include <cmath>
#include <vector>

#include "primitives.hpp"
#include "toad/adam.hpp"
#include "toad/autodiff.hpp"
#include "toad/errors.hpp"

using namespace toad;
using ad::Tensor;

TEST_CASE("every primitive matches central differences at 10 random points") {
  const auto s = primitives::run_all(11, 10);
  INFO(s.worst);
  CHECK(s.cases >= 20);
  CHECK(s.max_error < 1e-6);
}

TEST_CASE("grad_reverse scales the upstream gradient by -rho") {
  CHECK(primitives::check_grad_reverse(5, 10) < 1e-6);

  auto x = Tensor::vector({0.3, -1.2}, true);
  auto y = ad::grad_reverse(x, 0.7);
  CHECK(y[0] == 0.3);
  CHECK(y[1] == -1.2);
  ad::backward(ad::sum(ad::scale(y, 2.0)));
  CHECK(x.grad()[0] == doctest::Approx(-1.4).epsilon(1e-15));
  CHECK(x.grad()[1] == doctest::Approx(-1.4).epsilon(1e-15));
}

TEST_CASE("grad_reverse with rho 0 blocks the gradient and rejects negative rho") {
  auto x = Tensor::vector({1.0, 2.0}, true);
  ad::backward(ad::sum(ad::grad_reverse(x, 0.0)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK_THROWS_AS(ad::grad_reverse(x, -0.1), ConfigError);
}

TEST_CASE("leaves accumulate across backward passes until zero_grad") {
  auto w = Tensor::vector({1.0, -2.0}, true);
  auto loss = [&] { return ad::sum(ad::mul(w, w)); };
  ad::backward(loss());
  ad::backward(loss());
  CHECK(w.grad()[0] == 4.0);
  CHECK(w.grad()[1] == -8.0);
  w.zero_grad();
  ad::backward(loss());
  CHECK(w.grad()[0] == 2.0);
}

TEST_CASE("shared subexpressions receive gradient from every consumer") {
  auto x = Tensor::scalar(1.5, true);
  auto y = ad::mul(x, x);
  auto z = ad::add(y, ad::scale(y, 3.0));  // 4 x^2
  const ad::Graph g(z);
  CHECK(g.size() == 4);
  ad::backward(z);
  CHECK(x.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("backward rejects non-scalar losses") {
  auto x = Tensor::vector({1.0, 2.0}, true);
  CHECK_THROWS_AS(ad::backward(ad::tanh(x)), UsageError);
}

TEST_CASE("shape mismatches name the op and both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2, 2});
  try {
    ad::matmul(a, b);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[2,2]") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::add(Tensor::zeros({3}), Tensor::zeros({4})), ConfigError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0}), ConfigError);
}

TEST_CASE("no-grad mode records nothing") {
  auto w = Tensor::vector({1.0}, true);
  Tensor y;
  {
    ad::NoGradGuard guard;
    CHECK_FALSE(ad::grad_enabled());
    y = ad::tanh(w);
  }
  CHECK(ad::grad_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
}

TEST_CASE("softmax masks positions to exactly zero and rejects an all-masked row") {
  auto x = Tensor::vector({3.0, 1.0, -2.0});
  std::vector<bool> mask{true, false, true};
  auto p = ad::softmax(x, &mask);
  CHECK(p[1] == 0.0);
  CHECK(p[0] + p[2] == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<bool> none(3, false);
  CHECK_THROWS_AS(ad::softmax(x, &none), InputError);
}

TEST_CASE("softmax and cross entropy stay finite for large logits") {
  auto x = Tensor::vector({1000.0, -1000.0, 0.0});
  auto p = ad::softmax(x);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(ad::cross_entropy(x, 1).item()));
  CHECK(ad::cross_entropy(x, 1).item() == doctest::Approx(2000.0));
  CHECK_THROWS_AS(ad::cross_entropy(x, 3), InputError);
}

TEST_CASE("sigmoid is stable at extreme inputs") {
  auto s = ad::sigmoid(Tensor::vector({-800.0, 800.0, 0.0}));
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 1.0);
  CHECK(s[2] == 0.5);
}

TEST_CASE("adam first step moves each coordinate by lr against the gradient sign") {
  auto w = Tensor::vector({1.0, -1.0, 0.5}, true);
  std::vector<Tensor> params{w};
  auto state = ad::AdamState::for_params(params);
  ad::backward(ad::sum(ad::mul(w, Tensor::vector({2.0, -3.0, 0.0}))));
  ad::adam_step(params, state, 0.01);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  CHECK(w[0] == doctest::Approx(1.0 - 0.01 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(-1.0 + 0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
  CHECK(w[2] == 0.5);
  CHECK(state.step == 1);
  CHECK_THROWS_AS(ad::adam_step(params, state, 0.0), ConfigError);
}

TEST_CASE("adam two-step trajectory matches hand evaluation") {
  auto w = Tensor::scalar(0.0, true);
  std::vector<Tensor> params{w};
  auto state = ad::AdamState::for_params(params);
  const double g1 = 1.0, g2 = -2.0;
  for (double g : {g1, g2}) {
    w.zero_grad();
    ad::backward(ad::scale(w, g));
    ad::adam_step(params, state, 0.1);
  }
  const double m1 = 0.1 * g1, v1 = 0.001 * g1 * g1;
  const double w1 = -0.1 * (m1 / 0.1) / (std::sqrt(v1 / 0.001) + 1e-8);
  const double m2 = 0.9 * m1 + 0.1 * g2, v2 = 0.999 * v1 + 0.001 * g2 * g2;
  const double b1 = 1 - 0.81, b2 = 1 - 0.999 * 0.999;
  const double w2 = w1 - 0.1 * (m2 / b1) / (std::sqrt(v2 / b2) + 1e-8);
  CHECK(w.item() == doctest::Approx(w2).epsilon(1e-13));
}
