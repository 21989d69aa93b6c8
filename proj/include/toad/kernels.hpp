#pragma once

// Data-parallel kernels. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp; both produce
// bit-identical results because every output element is computed by exactly
// one thread with the same operation order.

#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <vector>

namespace toad::kernels {

enum class Exec { kSerial, kParallel };

// Number of worker threads an OpenMP region would use (1 without OpenMP).
int max_workers();

namespace serial {

// C (+)= A[m,k] * B[k,n], row-major.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

// For each point (row of `points`, `dim` wide) the index of the nearest
// centroid by squared Euclidean distance (lowest index wins ties) and that
// squared distance.
void assign_nearest(std::span<const double> points, std::span<const double> centroids,
                    std::size_t dim, std::span<int> labels, std::span<double> dist2);

// Jensen-Shannon divergence for each (p, q) pair of equal-length
// distributions. out[i] = D_JS(p[i] || q[i]).
void js_batch(std::span<const std::vector<double>> p, std::span<const std::vector<double>> q,
              std::span<double> out);

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace serial

namespace omp {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

void assign_nearest(std::span<const double> points, std::span<const double> centroids,
                    std::size_t dim, std::span<int> labels, std::span<double> dist2);

void js_batch(std::span<const std::vector<double>> p, std::span<const std::vector<double>> q,
              std::span<double> out);

// Runs body(i) for i in [0, n) with dynamic scheduling. workers <= 0 uses
// the OpenMP default. The first exception (lowest index) is rethrown after
// the loop.
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body,
                    int workers = 0);

}  // namespace omp

// Dispatchers.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate, Exec exec);
void assign_nearest(std::span<const double> points, std::span<const double> centroids,
                    std::size_t dim, std::span<int> labels, std::span<double> dist2, Exec exec);
void js_batch(std::span<const std::vector<double>> p, std::span<const std::vector<double>> q,
              std::span<double> out, Exec exec);
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body, Exec exec,
                    int workers = 0);

// Single-pair D_JS with natural log and 0 log 0 = 0. Shared by both kernel
// variants so the per-pair arithmetic is identical.
double js_divergence_unchecked(std::span<const double> p, std::span<const double> q);

}  // namespace toad::kernels
