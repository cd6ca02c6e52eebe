#pragma once

// Throughput-critical inner loops. Every kernel exists in a serial reference
// form and an OpenMP form; both evaluate each output element with the same
// arithmetic so their results are bitwise identical for any thread count.

#include <cstddef>
#include <span>

namespace lst::kernels {

/// Inner product with four interleaved accumulators.
double dot(const double* a, const double* b, std::size_t dim);

/// Squared Euclidean distance, accumulated elementwise.
double squared_distance(const double* a, const double* b, std::size_t dim);

// out[i] = <query, bank row i> / dim. With both sides stored at zero mean and
// unit (population) std this is the correlation similarity.
void similarity_scores_serial(std::span<const double> query, std::span<const double> bank, std::size_t dim,
                              std::span<double> out);
void similarity_scores_parallel(std::span<const double> query, std::span<const double> bank, std::size_t dim,
                                std::span<double> out);

// out[q * n_bank + i] = <query q, bank row i> / dim.
void batch_similarity_serial(std::span<const double> queries, std::span<const double> bank, std::size_t dim,
                             std::span<double> out);
void batch_similarity_parallel(std::span<const double> queries, std::span<const double> bank, std::size_t dim,
                               std::span<double> out);

// out[i] = -|query - bank row i|^2 / 4, the log of the Gaussian kernel weight.
void gaussian_log_scores_serial(std::span<const double> query, std::span<const double> bank, std::size_t dim,
                                std::span<double> out);
void gaussian_log_scores_parallel(std::span<const double> query, std::span<const double> bank, std::size_t dim,
                                  std::span<double> out);

// Nearest centroid per point (ties go to the lower centroid index); writes
// the squared distance alongside.
void assign_nearest_serial(std::span<const double> points, std::span<const double> centroids, std::size_t dim,
                           std::span<std::size_t> assignment, std::span<double> distance);
void assign_nearest_parallel(std::span<const double> points, std::span<const double> centroids, std::size_t dim,
                             std::span<std::size_t> assignment, std::span<double> distance);

/// Applies LST_THREADS (if set to a positive integer) to the OpenMP runtime.
void configure_threads_from_env();
int max_threads();

}  // namespace lst::kernels
