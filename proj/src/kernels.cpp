#include "lst/kernels.hpp"

#include <omp.h>

#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

namespace lst::kernels {

namespace {

void check_shapes(std::size_t query_len, std::size_t bank_len, std::size_t dim, std::size_t out_len,
                  std::size_t rows_per_query) {
  if (dim == 0 || query_len % dim != 0 || bank_len % dim != 0)
    throw std::invalid_argument("kernels: buffer length not a multiple of dim");
  if (out_len != (query_len / dim) * rows_per_query) throw std::invalid_argument("kernels: output size mismatch");
}

void check_single(std::size_t query_len, std::size_t bank_len, std::size_t dim, std::size_t out_len) {
  if (dim == 0 || query_len != dim) throw std::invalid_argument("kernels: query length != dim");
  if (bank_len % dim != 0) throw std::invalid_argument("kernels: bank length not a multiple of dim");
  if (out_len != bank_len / dim) throw std::invalid_argument("kernels: output size mismatch");
}

// Below this much work per call, thread start-up dominates.
constexpr std::size_t kParallelMinWork = 1 << 15;

}  // namespace

double dot(const double* a, const double* b, std::size_t dim) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t z = 0;
  for (; z + 4 <= dim; z += 4) {
    s0 += a[z] * b[z];
    s1 += a[z + 1] * b[z + 1];
    s2 += a[z + 2] * b[z + 2];
    s3 += a[z + 3] * b[z + 3];
  }
  for (; z < dim; ++z) s0 += a[z] * b[z];
  return (s0 + s1) + (s2 + s3);
}

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s0 = 0.0, s1 = 0.0;
  std::size_t z = 0;
  for (; z + 2 <= dim; z += 2) {
    const double d0 = a[z] - b[z];
    const double d1 = a[z + 1] - b[z + 1];
    s0 += d0 * d0;
    s1 += d1 * d1;
  }
  for (; z < dim; ++z) {
    const double d = a[z] - b[z];
    s0 += d * d;
  }
  return s0 + s1;
}

void similarity_scores_serial(std::span<const double> query, std::span<const double> bank, std::size_t dim,
                              std::span<double> out) {
  check_single(query.size(), bank.size(), dim, out.size());
  const std::size_t n = bank.size() / dim;
  const double inv = 1.0 / static_cast<double>(dim);
  for (std::size_t i = 0; i < n; ++i) out[i] = dot(query.data(), bank.data() + i * dim, dim) * inv;
}

void similarity_scores_parallel(std::span<const double> query, std::span<const double> bank, std::size_t dim,
                                std::span<double> out) {
  check_single(query.size(), bank.size(), dim, out.size());
  const auto n = static_cast<std::ptrdiff_t>(bank.size() / dim);
  const double inv = 1.0 / static_cast<double>(dim);
#pragma omp parallel for schedule(static) if (bank.size() >= kParallelMinWork)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = dot(query.data(), bank.data() + static_cast<std::size_t>(i) * dim, dim) * inv;
}

void batch_similarity_serial(std::span<const double> queries, std::span<const double> bank, std::size_t dim,
                             std::span<double> out) {
  if (dim == 0) throw std::invalid_argument("kernels: dim must be positive");
  const std::size_t nb = bank.size() / dim;
  check_shapes(queries.size(), bank.size(), dim, out.size(), nb);
  const std::size_t nq = queries.size() / dim;
  const double inv = 1.0 / static_cast<double>(dim);
  for (std::size_t q = 0; q < nq; ++q)
    for (std::size_t i = 0; i < nb; ++i)
      out[q * nb + i] = dot(queries.data() + q * dim, bank.data() + i * dim, dim) * inv;
}

void batch_similarity_parallel(std::span<const double> queries, std::span<const double> bank, std::size_t dim,
                               std::span<double> out) {
  if (dim == 0) throw std::invalid_argument("kernels: dim must be positive");
  const std::size_t nb = bank.size() / dim;
  check_shapes(queries.size(), bank.size(), dim, out.size(), nb);
  const auto nq = static_cast<std::ptrdiff_t>(queries.size() / dim);
  const double inv = 1.0 / static_cast<double>(dim);
#pragma omp parallel for schedule(static) if (queries.size() * nb >= kParallelMinWork)
  for (std::ptrdiff_t q = 0; q < nq; ++q) {
    const auto qq = static_cast<std::size_t>(q);
    for (std::size_t i = 0; i < nb; ++i)
      out[qq * nb + i] = dot(queries.data() + qq * dim, bank.data() + i * dim, dim) * inv;
  }
}

void gaussian_log_scores_serial(std::span<const double> query, std::span<const double> bank, std::size_t dim,
                                std::span<double> out) {
  check_single(query.size(), bank.size(), dim, out.size());
  const std::size_t n = bank.size() / dim;
  for (std::size_t i = 0; i < n; ++i) out[i] = -squared_distance(query.data(), bank.data() + i * dim, dim) / 4.0;
}

void gaussian_log_scores_parallel(std::span<const double> query, std::span<const double> bank, std::size_t dim,
                                  std::span<double> out) {
  check_single(query.size(), bank.size(), dim, out.size());
  const auto n = static_cast<std::ptrdiff_t>(bank.size() / dim);
#pragma omp parallel for schedule(static) if (bank.size() >= kParallelMinWork)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        -squared_distance(query.data(), bank.data() + static_cast<std::size_t>(i) * dim, dim) / 4.0;
}

namespace {

inline void nearest_one(const double* p, std::span<const double> centroids, std::size_t dim, std::size_t& best,
                        double& best_d) {
  const std::size_t k = centroids.size() / dim;
  best = 0;
  best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double d = squared_distance(p, centroids.data() + c * dim, dim);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
}

}  // namespace

void assign_nearest_serial(std::span<const double> points, std::span<const double> centroids, std::size_t dim,
                           std::span<std::size_t> assignment, std::span<double> distance) {
  const std::size_t n = points.size() / dim;
  if (assignment.size() != n || distance.size() != n || centroids.empty())
    throw std::invalid_argument("kernels: assign_nearest size mismatch");
  for (std::size_t i = 0; i < n; ++i) nearest_one(points.data() + i * dim, centroids, dim, assignment[i], distance[i]);
}

void assign_nearest_parallel(std::span<const double> points, std::span<const double> centroids, std::size_t dim,
                             std::span<std::size_t> assignment, std::span<double> distance) {
  const auto n = static_cast<std::ptrdiff_t>(points.size() / dim);
  if (assignment.size() != static_cast<std::size_t>(n) || distance.size() != static_cast<std::size_t>(n) ||
      centroids.empty())
    throw std::invalid_argument("kernels: assign_nearest size mismatch");
#pragma omp parallel for schedule(static) if (points.size() * (centroids.size() / dim) >= kParallelMinWork)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    nearest_one(points.data() + ii * dim, centroids, dim, assignment[ii], distance[ii]);
  }
}

void configure_threads_from_env() {
  const char* env = std::getenv("LST_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n <= 0) throw std::invalid_argument(std::string("LST_THREADS must be a positive integer, got '") + env + "'");
  omp_set_num_threads(static_cast<int>(n));
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace lst::kernels
