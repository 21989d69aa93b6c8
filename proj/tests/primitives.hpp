#pragma once

// Finite-difference cases for every autodiff primitive, shared by the unit
// tests and the acceptance runner.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "toad/autodiff.hpp"
#include "toad/rng.hpp"

namespace primitives {

using toad::ad::Shape;
using toad::ad::Tensor;
namespace ad = toad::ad;

inline Tensor random_leaf(toad::Rng& rng, Shape shape, double lo = -1.5, double hi = 1.5) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Values bounded away from zero so relu's kink is never straddled by +-h.
inline Tensor away_from_zero(toad::Rng& rng, Shape shape) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) {
    const double m = rng.uniform(0.05, 1.5);
    x = rng.uniform() < 0.5 ? -m : m;
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

struct Case {
  std::string name;
  // Builds leaves from the rng and returns a closure producing the scalar.
  std::function<std::function<Tensor()>(toad::Rng&, std::vector<Tensor>&)> make;
};

inline std::vector<Case> cases() {
  std::vector<Case> c;
  auto unary = [](std::string name, Tensor (*op)(const Tensor&), bool avoid_zero) {
    return Case{name, [op, avoid_zero](toad::Rng& rng, std::vector<Tensor>& leaves) {
                  const Shape shape{3, 4};
                  leaves = {avoid_zero ? away_from_zero(rng, shape) : random_leaf(rng, shape)};
                  auto x = leaves[0];
                  const auto out_shape = op(x).shape();
                  std::vector<double> weights(ad::numel(out_shape));
                  for (auto& v : weights) v = rng.uniform(-1.0, 1.0);
                  const auto wt = Tensor::from(out_shape, weights);
                  // tanh keeps linear ops from having a constant gradient
                  return std::function<Tensor()>([op, x, wt] { return ad::sum(ad::mul(op(ad::tanh(x)), wt)); });
                }};
  };
  auto binary = [](std::string name, Tensor (*op)(const Tensor&, const Tensor&), Shape sa, Shape sb) {
    return Case{name, [op, sa, sb](toad::Rng& rng, std::vector<Tensor>& leaves) {
                  leaves = {random_leaf(rng, sa), random_leaf(rng, sb)};
                  auto a = leaves[0], b = leaves[1];
                  const auto out_shape = op(a, b).shape();
                  std::vector<double> weights(ad::numel(out_shape));
                  for (auto& v : weights) v = rng.uniform(-1.0, 1.0);
                  const auto wt = Tensor::from(out_shape, weights);
                  return std::function<Tensor()>([op, a, b, wt] { return ad::sum(ad::mul(op(a, b), wt)); });
                }};
  };

  c.push_back(binary("matmul 2x2", ad::matmul, {3, 4}, {4, 2}));
  c.push_back(binary("matmul 2x1", ad::matmul, {3, 4}, {4}));
  c.push_back(binary("matmul 1x2", ad::matmul, {4}, {4, 5}));
  c.push_back(binary("add", ad::add, {2, 3}, {2, 3}));
  c.push_back(binary("sub", ad::sub, {5}, {5}));
  c.push_back(binary("mul", ad::mul, {2, 3}, {2, 3}));
  c.push_back(binary("add_rowwise", ad::add_rowwise, {4, 3}, {3}));
  c.push_back(binary("squared_difference", ad::squared_difference, {2, 3}, {2, 3}));
  c.push_back(binary("mse", ad::mse, {3, 2}, {3, 2}));
  c.push_back(unary("sigmoid", ad::sigmoid, false));
  c.push_back(unary("tanh", ad::tanh, false));
  c.push_back(unary("relu", ad::relu, true));
  c.push_back(unary("sum", ad::sum, false));
  c.push_back(unary("mean", ad::mean, false));
  c.push_back(Case{"scale", [](toad::Rng& rng, std::vector<Tensor>& leaves) {
                     leaves = {random_leaf(rng, {6})};
                     auto x = leaves[0];
                     const double f = rng.uniform(-3.0, 3.0);
                     return std::function<Tensor()>([x, f] { return ad::sum(ad::tanh(ad::scale(x, f))); });
                   }});
  c.push_back(Case{"softmax", [](toad::Rng& rng, std::vector<Tensor>& leaves) {
                     leaves = {random_leaf(rng, {3, 5})};
                     auto x = leaves[0];
                     std::vector<double> w(15);
                     for (auto& v : w) v = rng.uniform(-1.0, 1.0);
                     const auto wt = Tensor::from({3, 5}, w);
                     return std::function<Tensor()>([x, wt] { return ad::sum(ad::mul(ad::softmax(x), wt)); });
                   }});
  c.push_back(Case{"masked softmax", [](toad::Rng& rng, std::vector<Tensor>& leaves) {
                     leaves = {random_leaf(rng, {6})};
                     auto x = leaves[0];
                     auto mask = std::make_shared<std::vector<bool>>(6, true);
                     (*mask)[rng.below(6)] = false;
                     (*mask)[rng.below(6)] = false;
                     std::vector<double> w(6);
                     for (auto& v : w) v = rng.uniform(-1.0, 1.0);
                     const auto wt = Tensor::vector(w);
                     return std::function<Tensor()>(
                         [x, wt, mask] { return ad::sum(ad::mul(ad::softmax(x, mask.get()), wt)); });
                   }});
  c.push_back(Case{"concat axis 0", [](toad::Rng& rng, std::vector<Tensor>& leaves) {
                     leaves = {random_leaf(rng, {2, 3}), random_leaf(rng, {1, 3})};
                     auto a = leaves[0], b = leaves[1];
                     std::vector<double> w(9);
                     for (auto& v : w) v = rng.uniform(-1.0, 1.0);
                     const auto wt = Tensor::from({3, 3}, w);
                     return std::function<Tensor()>([a, b, wt] {
                       const std::vector<Tensor> parts{a, b};
                       return ad::sum(ad::mul(ad::concat(parts, 0), wt));
                     });
                   }});
  c.push_back(Case{"concat axis 1", [](toad::Rng& rng, std::vector<Tensor>& leaves) {
                     leaves = {random_leaf(rng, {2, 3}), random_leaf(rng, {2, 2})};
                     auto a = leaves[0], b = leaves[1];
                     std::vector<double> w(10);
                     for (auto& v : w) v = rng.uniform(-1.0, 1.0);
                     const auto wt = Tensor::from({2, 5}, w);
                     return std::function<Tensor()>([a, b, wt] {
                       const std::vector<Tensor> parts{a, b};
                       return ad::sum(ad::mul(ad::concat(parts, 1), wt));
                     });
                   }});
  c.push_back(Case{"concat vectors", [](toad::Rng& rng, std::vector<Tensor>& leaves) {
                     leaves = {random_leaf(rng, {2}), random_leaf(rng, {4})};
                     auto a = leaves[0], b = leaves[1];
                     std::vector<double> w(6);
                     for (auto& v : w) v = rng.uniform(-1.0, 1.0);
                     const auto wt = Tensor::vector(w);
                     return std::function<Tensor()>([a, b, wt] {
                       const std::vector<Tensor> parts{a, b};
                       return ad::sum(ad::mul(ad::tanh(ad::concat(parts)), wt));
                     });
                   }});
  c.push_back(Case{"stack_rows", [](toad::Rng& rng, std::vector<Tensor>& leaves) {
                     leaves = {random_leaf(rng, {3}), random_leaf(rng, {3})};
                     auto a = leaves[0], b = leaves[1];
                     std::vector<double> w(6);
                     for (auto& v : w) v = rng.uniform(-1.0, 1.0);
                     const auto wt = Tensor::from({2, 3}, w);
                     return std::function<Tensor()>([a, b, wt] {
                       const std::vector<Tensor> rows{a, b};
                       return ad::sum(ad::mul(ad::tanh(ad::stack_rows(rows)), wt));
                     });
                   }});
  c.push_back(Case{"slice", [](toad::Rng& rng, std::vector<Tensor>& leaves) {
                     leaves = {random_leaf(rng, {7})};
                     auto x = leaves[0];
                     const auto start = static_cast<std::size_t>(rng.below(4));
                     std::vector<double> w(3);
                     for (auto& v : w) v = rng.uniform(-1.0, 1.0);
                     const auto wt = Tensor::vector(w);
                     return std::function<Tensor()>(
                         [x, wt, start] { return ad::sum(ad::mul(ad::slice(x, start, 3), wt)); });
                   }});
  c.push_back(Case{"cross_entropy", [](toad::Rng& rng, std::vector<Tensor>& leaves) {
                     leaves = {random_leaf(rng, {5}, -3.0, 3.0)};
                     auto x = leaves[0];
                     const auto gold = static_cast<std::size_t>(rng.below(5));
                     return std::function<Tensor()>([x, gold] { return ad::cross_entropy(x, gold); });
                   }});
  return c;
}

struct Summary {
  std::size_t cases = 0;
  std::size_t points = 0;
  double max_error = 0.0;
  std::string worst;
};

// Runs every case at `draws` random points.
inline Summary run_all(std::uint64_t seed, int draws) {
  Summary s;
  for (const auto& c : cases()) {
    ++s.cases;
    for (int d = 0; d < draws; ++d) {
      toad::Rng rng(toad::derive_seed(seed, static_cast<std::uint64_t>(s.cases * 1000 + d)));
      std::vector<Tensor> leaves;
      auto f = c.make(rng, leaves);
      const auto r = gradcheck::check_scalar(leaves, f);
      ++s.points;
      if (r.max_error > s.max_error) {
        s.max_error = r.max_error;
        s.worst = c.name + ": " + r.worst;
      }
    }
  }
  return s;
}

// grad_reverse: the analytic gradient must equal -rho times the derivative
// of the (identity) forward function. Returns the max error over draws.
inline double check_grad_reverse(std::uint64_t seed, int draws) {
  double worst = 0.0;
  for (int d = 0; d < draws; ++d) {
    toad::Rng rng(toad::derive_seed(seed, static_cast<std::uint64_t>(d)));
    const double rho = rng.uniform(0.0, 2.0);
    std::vector<Tensor> leaves{random_leaf(rng, {4})};
    auto x = leaves[0];
    std::vector<double> w(4);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    const auto wt = Tensor::vector(w);
    auto reversed = [&] { return ad::sum(ad::mul(ad::tanh(ad::grad_reverse(x, rho)), wt)); };
    auto plain = [&] { return ad::sum(ad::mul(ad::tanh(x), wt)); };
    x.zero_grad();
    ad::backward(reversed());
    const std::vector<double> got(x.grad().begin(), x.grad().end());
    const double h = 1e-6;
    auto values = x.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = plain().item();
      values[i] = saved - h;
      const double down = plain().item();
      values[i] = saved;
      worst = std::max(worst, gradcheck::error(got[i], -rho * (up - down) / (2 * h)));
    }
  }
  return worst;
}

}  // namespace primitives
