#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lst/market_data.hpp"

namespace lst {

/// Default window lengths in buckets: 30, 60 and 120 minutes on a 10 s grid.
inline constexpr std::array<std::size_t, 3> kDefaultWindows{180, 360, 720};

struct NormalizedVector {
  std::vector<double> values;
  bool constant = false;
};

/// Zero-mean, unit population-std copy of x. A constant input maps to the
/// zero vector with `constant` set.
NormalizedVector normalize(std::span<const double> x);

/// In-place variant used by the batch paths; returns the constant flag.
bool normalize_into(std::span<const double> x, std::span<double> out);

struct Pattern {
  std::vector<double> x;
  double y = 0.0;  // price change over the bucket following the window
  std::vector<double> normalized_x;
  bool constant = false;
};

/// Windows x = prices[i, i+M) with label prices[i+M] - prices[i+M-1], for
/// i = 0, stride, 2*stride, ... while the label bucket exists.
std::vector<Pattern> extract_windows(const PriceSeries& series, std::size_t window, std::size_t stride = 1);

/// Row-major block of normalized windows plus labels; the form k-means and
/// bank building consume.
struct WindowMatrix {
  std::size_t dim = 0;
  std::vector<double> rows;
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {rows.data() + i * dim, dim}; }
};

WindowMatrix extract_window_matrix(const PriceSeries& series, std::size_t window, std::size_t stride = 1);
WindowMatrix to_window_matrix(std::span<const Pattern> patterns);

struct ClusterSet {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;  // k * dim
  std::vector<std::size_t> assignments;
  std::vector<std::size_t> population;
  std::vector<double> label_mean;
  std::vector<double> label_std;
  // Sum of squared distances to assigned centroids after each assignment pass.
  std::vector<double> objective_history;

  std::span<const double> centroid(std::size_t c) const { return {centroids.data() + c * dim, dim}; }
};

/// Lloyd's algorithm on normalized windows with k-means++ seeding. Stops when
/// assignments stop changing or after max_iters passes.
ClusterSet kmeans(const WindowMatrix& data, std::size_t k, std::uint64_t seed, std::size_t max_iters = 100);
ClusterSet kmeans(std::span<const Pattern> patterns, std::size_t k, std::uint64_t seed, std::size_t max_iters = 100);

struct Representative {
  std::vector<double> vector;  // re-normalized centroid
  double label = 0.0;          // mean member label
  std::size_t population = 0;
  std::size_t cluster = 0;
  double score = 0.0;
};

inline constexpr double kEffectivenessEps = 1e-9;

/// |mean label| / (label std + eps) for cluster c.
double effectiveness(const ClusterSet& clusters, std::size_t c);

/// Top-m clusters by effectiveness; ties by larger population, then lower id.
std::vector<Representative> select_effective(const ClusterSet& clusters, std::size_t m);

struct PatternBank {
  std::size_t window_length = 0;
  double kernel_c = 1.0;
  std::vector<double> vectors;  // size() * window_length, row-major
  std::vector<double> labels;
  std::vector<std::size_t> populations;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> pattern(std::size_t i) const { return {vectors.data() + i * window_length, window_length}; }
  void add(std::span<const double> v, double label, std::size_t population = 1);
  void validate() const;
};

struct BankConfig {
  std::array<std::size_t, 3> windows = kDefaultWindows;
  std::size_t k = 100;
  std::size_t m = 20;
  std::size_t stride = 1;
  std::size_t max_iters = 100;
  std::uint64_t seed = 0;
};

using BankSet = std::array<PatternBank, 3>;

/// Banks S1..S3 from one (training) series. k is clamped to max(1, n/2) for n
/// windows and m to k.
BankSet build_banks(const PriceSeries& series, const BankConfig& config = {});

std::string bank_to_json(const PatternBank& bank);
PatternBank bank_from_json(const std::string& text);
void write_bank_binary(std::ostream& out, const PatternBank& bank);
PatternBank read_bank_binary(std::istream& in);

/// Format chosen by extension: ".bin" is the binary form, anything else JSON.
void save_bank(const std::string& path, const PatternBank& bank);
PatternBank load_bank(const std::string& path);

}  // namespace lst
