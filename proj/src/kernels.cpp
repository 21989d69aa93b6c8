#include "toad/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace toad::kernels {

namespace {

inline void gemm_row(std::span<const double> a, std::span<const double> b, std::span<double> c,
                     std::size_t i, std::size_t k, std::size_t n, bool accumulate) {
  double* out = c.data() + i * n;
  if (!accumulate) std::fill(out, out + n, 0.0);
  const double* arow = a.data() + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = arow[p];
    const double* brow = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += av * brow[j];
  }
}

inline void assign_one(std::span<const double> points, std::span<const double> centroids,
                       std::size_t dim, std::size_t i, std::span<int> labels,
                       std::span<double> dist2) {
  const std::size_t k = centroids.size() / dim;
  const double* x = points.data() + i * dim;
  double best = std::numeric_limits<double>::infinity();
  int best_j = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double* c = centroids.data() + j * dim;
    double d = 0.0;
    for (std::size_t t = 0; t < dim; ++t) {
      const double diff = x[t] - c[t];
      d += diff * diff;
    }
    if (d < best) {
      best = d;
      best_j = static_cast<int>(j);
    }
  }
  labels[i] = best_j;
  dist2[i] = best;
}

}  // namespace

double js_divergence_unchecked(std::span<const double> p, std::span<const double> q) {
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kl_p += p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) kl_q += q[i] * std::log(q[i] / m);
  }
  // rounding can step just outside [0, ln 2]
  return std::clamp(0.5 * (kl_p + kl_q), 0.0, std::numbers::ln2);
}

int max_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(a, b, c, i, k, n, accumulate);
}

void assign_nearest(std::span<const double> points, std::span<const double> centroids,
                    std::size_t dim, std::span<int> labels, std::span<double> dist2) {
  const std::size_t n = points.size() / dim;
  for (std::size_t i = 0; i < n; ++i) assign_one(points, centroids, dim, i, labels, dist2);
}

void js_batch(std::span<const std::vector<double>> p, std::span<const std::vector<double>> q,
              std::span<double> out) {
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = js_divergence_unchecked(p[i], q[i]);
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace serial

namespace omp {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    gemm_row(a, b, c, static_cast<std::size_t>(i), k, n, accumulate);
}

void assign_nearest(std::span<const double> points, std::span<const double> centroids,
                    std::size_t dim, std::span<int> labels, std::span<double> dist2) {
  const auto n = static_cast<std::ptrdiff_t>(points.size() / dim);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    assign_one(points, centroids, dim, static_cast<std::size_t>(i), labels, dist2);
}

void js_batch(std::span<const std::vector<double>> p, std::span<const std::vector<double>> q,
              std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(p.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    out[u] = js_divergence_unchecked(p[u], q[u]);
  }
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body, int workers) {
  std::mutex mu;
  std::exception_ptr first;
  std::size_t first_index = n;
  const auto count = static_cast<std::ptrdiff_t>(n);
#ifdef _OPENMP
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#else
  (void)workers;
#endif
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      body(u);
    } catch (...) {
      std::lock_guard lock(mu);
      if (u < first_index) {
        first_index = u;
        first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace omp

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate, Exec exec) {
  if (exec == Exec::kParallel)
    omp::gemm(a, b, c, m, k, n, accumulate);
  else
    serial::gemm(a, b, c, m, k, n, accumulate);
}

void assign_nearest(std::span<const double> points, std::span<const double> centroids,
                    std::size_t dim, std::span<int> labels, std::span<double> dist2, Exec exec) {
  if (exec == Exec::kParallel)
    omp::assign_nearest(points, centroids, dim, labels, dist2);
  else
    serial::assign_nearest(points, centroids, dim, labels, dist2);
}

void js_batch(std::span<const std::vector<double>> p, std::span<const std::vector<double>> q,
              std::span<double> out, Exec exec) {
  if (exec == Exec::kParallel)
    omp::js_batch(p, q, out);
  else
    serial::js_batch(p, q, out);
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body, Exec exec,
                    int workers) {
  if (exec == Exec::kParallel)
    omp::for_each_index(n, body, workers);
  else
    serial::for_each_index(n, body);
}

}  // namespace toad::kernels
