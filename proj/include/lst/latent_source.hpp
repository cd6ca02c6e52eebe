#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "lst/market_data.hpp"

namespace lst {

struct PointMass {
  double value = 0.0;
};

struct GaussianLabel {
  double mean = 0.0;
  double variance = 1.0;
};

using LabelDist = std::variant<PointMass, GaussianLabel>;

/// Generative model: K prototype vectors, a mixture over them, and one label
/// distribution per prototype. noise_sigma = 1 is the identity-covariance case.
struct LatentSourceSpec {
  std::vector<std::vector<double>> sources;
  std::vector<double> mix;
  std::vector<LabelDist> label_dists;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
  // Used only by generate_price_series.
  double start_price = 1000.0;
  double interval = kDefaultInterval;

  std::size_t num_sources() const { return sources.size(); }
  std::size_t dim() const { return sources.empty() ? 0 : sources.front().size(); }

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

struct LabeledPoint {
  std::vector<double> x;
  double y = 0.0;
  std::size_t source = 0;  // zero-based
};

std::vector<LabeledPoint> generate_labeled(const LatentSourceSpec& spec, std::size_t n);

struct Embedding {
  std::size_t start = 0;  // first bucket whose increment belongs to the pattern
  std::size_t length = 0;
  std::size_t source = 0;
};

struct SyntheticSeries {
  PriceSeries series;
  std::vector<Embedding> embeddings;
};

/// Stitches randomly drawn sources, read as per-bucket price increments, into
/// a gapless price path of floor(duration / interval) buckets.
SyntheticSeries generate_price_series(const LatentSourceSpec& spec, double duration, std::uint64_t seed);

LatentSourceSpec load_latent_spec(const std::string& path);
void save_latent_spec(const std::string& path, const LatentSourceSpec& spec);
std::string latent_spec_to_json(const LatentSourceSpec& spec);
LatentSourceSpec latent_spec_from_json(const std::string& text);

}  // namespace lst
