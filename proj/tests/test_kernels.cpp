#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "toad/kernels.hpp"
#include "toad/rng.hpp"

using namespace toad;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

std::vector<double> random_distribution(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  double s = 0;
  for (auto& x : v) s += (x = rng.uniform());
  for (auto& x : v) x /= s;
  return v;
}

}  // namespace

TEST_CASE("gemm matches the triple loop and both variants agree bitwise") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(17), k = 1 + rng.below(13), n = 1 + rng.below(19);
    const auto a = random_values(rng, m * k), b = random_values(rng, k * n);
    std::vector<double> expect(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
        expect[i * n + j] = s;
      }
    std::vector<double> serial(m * n), parallel(m * n);
    kernels::serial::gemm(a, b, serial, m, k, n);
    kernels::omp::gemm(a, b, parallel, m, k, n);
    CHECK(serial == parallel);
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(serial[i] == doctest::Approx(expect[i]).epsilon(1e-12));

    auto acc_s = serial, acc_p = parallel;
    kernels::serial::gemm(a, b, acc_s, m, k, n, true);
    kernels::omp::gemm(a, b, acc_p, m, k, n, true);
    CHECK(acc_s == acc_p);
    CHECK(acc_s[0] == doctest::Approx(2 * expect[0]).epsilon(1e-12));
  }
}

TEST_CASE("gemm propagates NaN from zero-multiplied entries") {
  std::vector<double> a{0.0}, b{std::nan("")}, c{0.0};
  kernels::serial::gemm(a, b, c, 1, 1, 1);
  CHECK(std::isnan(c[0]));
}

TEST_CASE("assign_nearest picks the closest centroid, lowest index on ties") {
  const std::vector<double> centroids{0.0, 0.0, 2.0, 0.0, 0.0, 0.0};  // 0 and 2 coincide
  const std::vector<double> points{0.1, 0.0, 1.9, 0.0, 1.0, 0.0};
  std::vector<int> labels(3);
  std::vector<double> d2(3);
  kernels::serial::assign_nearest(points, centroids, 2, labels, d2);
  CHECK(labels[0] == 0);
  CHECK(labels[1] == 1);
  CHECK(labels[2] == 0);  // equidistant to all; lowest index
  CHECK(d2[2] == 1.0);

  Rng rng(8);
  const auto pts = random_values(rng, 300 * 5), cents = random_values(rng, 7 * 5);
  std::vector<int> ls(300), lp(300);
  std::vector<double> ds(300), dp(300);
  kernels::serial::assign_nearest(pts, cents, 5, ls, ds);
  kernels::omp::assign_nearest(pts, cents, 5, lp, dp);
  CHECK(ls == lp);
  CHECK(ds == dp);
}

TEST_CASE("js_batch variants agree bitwise") {
  Rng rng(21);
  std::vector<std::vector<double>> p, q;
  for (int i = 0; i < 64; ++i) {
    const std::size_t n = 1 + rng.below(40);
    p.push_back(random_distribution(rng, n));
    q.push_back(random_distribution(rng, n));
  }
  std::vector<double> s(64), o(64);
  kernels::serial::js_batch(p, q, s);
  kernels::omp::js_batch(p, q, o);
  CHECK(s == o);
  for (double v : s) {
    CHECK(v >= 0.0);
    CHECK(v <= std::log(2.0) + 1e-15);
  }
}

TEST_CASE("for_each_index visits every index once and rethrows the lowest failure") {
  std::vector<std::atomic<int>> hits(1000);
  kernels::omp::for_each_index(1000, [&](std::size_t i) { hits[i]++; });
  bool all_once = true;
  for (auto& h : hits) all_once = all_once && h.load() == 1;
  CHECK(all_once);

  try {
    kernels::omp::for_each_index(100, [](std::size_t i) {
      if (i == 17 || i == 80) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "fail 17");
  }
  CHECK_THROWS_AS(kernels::serial::for_each_index(3, [](std::size_t) { throw std::logic_error("x"); }),
                  std::logic_error);
}

TEST_CASE("dispatchers route to both variants") {
  Rng rng(4);
  const auto a = random_values(rng, 12), b = random_values(rng, 12);
  std::vector<double> c1(9), c2(9);
  kernels::gemm(a, b, c1, 3, 4, 3, false, kernels::Exec::kSerial);
  kernels::gemm(a, b, c2, 3, 4, 3, false, kernels::Exec::kParallel);
  CHECK(c1 == c2);
  CHECK(kernels::max_workers() >= 1);
}
