#include "lst/bayes_regress.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lst/kernels.hpp"

namespace lst {

void KernelChoice::validate() const {
  if (variant == KernelVariant::exp_similarity && !(c > 0.0))
    throw std::invalid_argument("kernel constant c must be positive");
}

std::string to_string(KernelVariant v) {
  return v == KernelVariant::gaussian_l2 ? "gaussian_l2" : "exp_similarity";
}

KernelVariant kernel_variant_from_string(const std::string& s) {
  if (s == "gaussian_l2") return KernelVariant::gaussian_l2;
  if (s == "exp_similarity") return KernelVariant::exp_similarity;
  throw std::invalid_argument("unknown kernel variant '" + s + "'");
}

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("similarity: dimension mismatch");
  const std::size_t m = a.size();
  if (m < 2) throw std::invalid_argument("similarity: need at least 2 coordinates");
  double ma = 0.0, mb = 0.0;
  for (std::size_t z = 0; z < m; ++z) {
    ma += a[z];
    mb += b[z];
  }
  ma /= static_cast<double>(m);
  mb /= static_cast<double>(m);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t z = 0; z < m; ++z) {
    const double da = a[z] - ma;
    const double db = b[z] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  // Same constant test as normalize(): population std below 1e-12 * scale.
  auto flat = [m](double ss, double mean) {
    const double tol = 1e-12 * std::max(1.0, std::abs(mean));
    return !(ss / static_cast<double>(m) > tol * tol);
  };
  if (flat(saa, ma) || flat(sbb, mb)) return 0.0;
  // Equal to sum(da*db) / (M * std(a) * std(b)); the M factors cancel.
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

void check_query(std::span<const double> x, const PatternBank& bank) {
  if (bank.empty()) throw std::invalid_argument("kernel: empty pattern bank");
  if (x.size() != bank.window_length)
    throw std::invalid_argument("kernel: query dimension " + std::to_string(x.size()) + " != bank dimension " +
                                std::to_string(bank.window_length));
}

double weighted_label(std::span<const double> log_scores, std::span<const double> labels) {
  const double mx = *std::max_element(log_scores.begin(), log_scores.end());
  double z = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < log_scores.size(); ++i) {
    const double w = std::exp(log_scores[i] - mx);
    z += w;
    acc += w * labels[i];
  }
  return acc / z;
}

}  // namespace

std::vector<double> log_kernel_scores(std::span<const double> x, const PatternBank& bank, const KernelChoice& kernel) {
  check_query(x, bank);
  kernel.validate();
  std::vector<double> out(bank.size());
  if (kernel.variant == KernelVariant::gaussian_l2) {
    kernels::gaussian_log_scores_serial(x, bank.vectors, bank.window_length, out);
  } else {
    const auto q = normalize(x);
    for (std::size_t i = 0; i < bank.size(); ++i) out[i] = kernel.c * similarity(q.values, bank.pattern(i));
  }
  return out;
}

std::vector<double> softmax(std::span<const double> log_scores) {
  if (log_scores.empty()) throw std::invalid_argument("softmax: empty input");
  const double mx = *std::max_element(log_scores.begin(), log_scores.end());
  std::vector<double> w(log_scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_scores[i] - mx);
    z += w[i];
  }
  for (auto& v : w) v /= z;
  return w;
}

std::vector<double> kernel_weights(std::span<const double> x, const PatternBank& bank, const KernelChoice& kernel) {
  return softmax(log_kernel_scores(x, bank, kernel));
}

double predict_label(std::span<const double> x, const PatternBank& bank, const KernelChoice& kernel) {
  const auto w = kernel_weights(x, bank, kernel);
  double y = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) y += w[i] * bank.labels[i];
  return y;
}

double empirical_conditional(double y, std::span<const double> x, const PatternBank& bank,
                             const KernelChoice& kernel) {
  const auto w = kernel_weights(x, bank, kernel);
  double p = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (bank.labels[i] == y) p += w[i];
  return p;
}

int classify_from_log_scores(std::span<const double> log_scores, std::span<const double> labels) {
  if (log_scores.size() != labels.size() || labels.empty())
    throw std::invalid_argument("classify: scores/labels size mismatch");
  bool has0 = false, has1 = false;
  for (double y : labels) {
    if (y == 0.0)
      has0 = true;
    else if (y == 1.0)
      has1 = true;
    else
      throw std::invalid_argument("classify_binary: labels must be 0 or 1");
  }
  if (!has0) return 1;
  if (!has1) return 0;
  const double mx = *std::max_element(log_scores.begin(), log_scores.end());
  double mass0 = 0.0, mass1 = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1.0 ? mass1 : mass0) += std::exp(log_scores[i] - mx);
  // ratio mass1 / mass0 > 1
  return mass1 > mass0 ? 1 : 0;
}

int classify_binary(std::span<const double> x, const PatternBank& bank, const KernelChoice& kernel) {
  return classify_from_log_scores(log_kernel_scores(x, bank, kernel), bank.labels);
}

std::size_t first_feature_index(const BankSet& banks) {
  std::size_t longest = 0;
  for (const auto& b : banks) longest = std::max(longest, b.window_length);
  return longest;
}

ScoreCache score_series(const PriceSeries& series, const BankSet& banks, KernelVariant variant, std::size_t first_t,
                        std::size_t count) {
  for (const auto& b : banks) b.validate();
  const std::size_t need = first_feature_index(banks);
  if (first_t < need)
    throw std::invalid_argument("features at t = " + std::to_string(first_t) + " need " + std::to_string(need) +
                                " buckets of history");
  if (first_t + count > series.size()) throw std::invalid_argument("features requested past the end of the series");

  ScoreCache cache;
  cache.variant = variant;
  cache.first_t = first_t;
  cache.count = count;
  for (std::size_t j = 0; j < 3; ++j) {
    cache.bank_sizes[j] = banks[j].size();
    cache.scores[j].assign(count * banks[j].size(), 0.0);
  }

#pragma omp parallel
  {
    std::vector<double> query;
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k) {
      const std::size_t kk = static_cast<std::size_t>(k);
      const std::size_t t = first_t + kk;
      for (std::size_t j = 0; j < 3; ++j) {
        const auto& bank = banks[j];
        const std::size_t m = bank.window_length;
        query.resize(m);
        normalize_into(std::span<const double>(series.prices.data() + t - m, m), query);
        std::span<double> out(cache.scores[j].data() + kk * bank.size(), bank.size());
        if (variant == KernelVariant::exp_similarity)
          kernels::similarity_scores_serial(query, bank.vectors, m, out);
        else
          kernels::gaussian_log_scores_serial(query, bank.vectors, m, out);
      }
    }
  }
  return cache;
}

std::vector<Features> features_from_cache(const ScoreCache& cache, const BankSet& banks, double c,
                                          const PriceSeries& series) {
  if (cache.variant == KernelVariant::exp_similarity && !(c > 0.0))
    throw std::invalid_argument("kernel constant c must be positive");
  std::vector<Features> out(cache.count);
#pragma omp parallel
  {
    std::vector<double> logs;
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(cache.count); ++k) {
      const std::size_t kk = static_cast<std::size_t>(k);
      auto& f = out[kk];
      for (std::size_t j = 0; j < 3; ++j) {
        const std::size_t nb = cache.bank_sizes[j];
        const double* row = cache.scores[j].data() + kk * nb;
        logs.assign(row, row + nb);
        if (cache.variant == KernelVariant::exp_similarity)
          for (auto& v : logs) v *= c;
        f.bank_dp[j] = weighted_label(logs, banks[j].labels);
      }
      f.imbalance = series.imbalances[cache.first_t + kk - 1];
    }
  }
  return out;
}

Features assemble_features(std::size_t t, const PriceSeries& series, const BankSet& banks,
                           const KernelChoice& kernel) {
  kernel.validate();
  const auto cache = score_series(series, banks, kernel.variant, t, 1);
  return features_from_cache(cache, banks, kernel.c, series).front();
}

CombinerWeights fit_weights(std::span<const FitSample> samples) {
  if (samples.size() < 5)
    throw std::invalid_argument("fit_weights: need at least 5 samples, got " + std::to_string(samples.size()));
  using Mat5 = Eigen::Matrix<double, 5, 5>;
  using Vec5 = Eigen::Matrix<double, 5, 1>;
  Mat5 gram = Mat5::Zero();
  Vec5 rhs = Vec5::Zero();
  for (const auto& s : samples) {
    Vec5 row;
    row << 1.0, s.features.bank_dp[0], s.features.bank_dp[1], s.features.bank_dp[2], s.features.imbalance;
    if (!row.allFinite() || !std::isfinite(s.target)) throw std::invalid_argument("fit_weights: non-finite sample");
    gram.noalias() += row * row.transpose();
    rhs.noalias() += row * s.target;
  }

  Eigen::FullPivLU<Mat5> lu(gram);
  lu.setThreshold(1e-10);
  CombinerWeights out;
  Vec5 w;
  if (lu.rank() == 5) {
    w = gram.ldlt().solve(rhs);
  } else {
    out.ridge = true;
    w = (gram + kRidgeLambda * Mat5::Identity()).ldlt().solve(rhs);
  }
  for (int i = 0; i < 5; ++i) out.w[static_cast<std::size_t>(i)] = w(i);
  return out;
}

double predict_dp(const Features& f, const CombinerWeights& w) {
  return w.w[0] + w.w[1] * f.bank_dp[0] + w.w[2] * f.bank_dp[1] + w.w[3] * f.bank_dp[2] + w.w[4] * f.imbalance;
}

Calibration calibrate_c(std::span<const double> grid, const PriceSeries& fit_series, const BankSet& banks,
                        KernelVariant variant) {
  if (grid.empty()) throw std::invalid_argument("calibrate_c: empty grid");
  std::vector<double> cs(grid.begin(), grid.end());
  for (double c : cs)
    if (!(c > 0.0)) throw std::invalid_argument("calibrate_c: grid values must be positive");
  std::sort(cs.begin(), cs.end());
  cs.erase(std::unique(cs.begin(), cs.end()), cs.end());

  const std::size_t first = first_feature_index(banks);
  if (fit_series.size() <= first)
    throw std::invalid_argument("calibrate_c: fitting series of " + std::to_string(fit_series.size()) +
                                " buckets leaves no samples after " + std::to_string(first) + " of history");
  const std::size_t count = fit_series.size() - first;
  const auto cache = score_series(fit_series, banks, variant, first, count);

  Calibration best;
  best.mse = std::numeric_limits<double>::infinity();
  std::vector<FitSample> samples(count);
  for (double c : cs) {
    const auto feats = features_from_cache(cache, banks, c, fit_series);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t t = first + k;
      samples[k] = {feats[k], fit_series.prices[t] - fit_series.prices[t - 1]};
    }
    const auto w = fit_weights(samples);
    double sse = 0.0;
    for (const auto& s : samples) {
      const double e = predict_dp(s.features, w) - s.target;
      sse += e * e;
    }
    const double mse = sse / static_cast<double>(count);
    best.grid_mse.emplace_back(c, mse);
    if (mse < best.mse) {
      best.mse = mse;
      best.c = c;
      best.weights = w;
    }
  }
  return best;
}

std::vector<double> predict_series(const PredictorModel& model, const PriceSeries& series) {
  model.kernel.validate();
  const std::size_t first = first_feature_index(model.banks);
  if (series.size() <= first)
    throw std::invalid_argument("series of " + std::to_string(series.size()) + " buckets is too short for " +
                                std::to_string(first) + " buckets of history");
  const std::size_t count = series.size() - first;
  const auto cache = score_series(series, model.banks, model.kernel.variant, first, count);
  const auto feats = features_from_cache(cache, model.banks, model.kernel.c, series);
  std::vector<double> dp(count);
  for (std::size_t k = 0; k < count; ++k) dp[k] = predict_dp(feats[k], model.weights);
  return dp;
}

void save_model(const std::string& path, const PredictorModel& model, const std::array<std::string, 3>& bank_files) {
  nlohmann::json j;
  j["kernel"] = to_string(model.kernel.variant);
  j["c"] = model.kernel.c;
  j["weights"] = model.weights.w;
  j["ridge"] = model.weights.ridge;
  j["banks"] = bank_files;
  j["threshold"] = model.threshold;
  j["thresholds"] = model.thresholds;
  j["fit_mse"] = model.fit_mse;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

PredictorModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  PredictorModel model;
  std::array<std::string, 3> files;
  try {
    const auto j = nlohmann::json::parse(in);
    model.kernel.variant = kernel_variant_from_string(j.at("kernel").get<std::string>());
    model.kernel.c = j.at("c").get<double>();
    model.weights.w = j.at("weights").get<std::array<double, 5>>();
    model.weights.ridge = j.value("ridge", false);
    files = j.at("banks").get<std::array<std::string, 3>>();
    model.threshold = j.value("threshold", 0.0);
    model.thresholds = j.value("thresholds", std::vector<double>{});
    model.fit_mse = j.value("fit_mse", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("model json " + path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  for (std::size_t j = 0; j < 3; ++j) {
    const auto p = std::filesystem::path(files[j]);
    model.banks[j] = load_bank((p.is_absolute() ? p : dir / p).string());
    model.banks[j].kernel_c = model.kernel.c;
  }
  model.kernel.validate();
  return model;
}

}  // namespace lst
