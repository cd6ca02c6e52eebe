#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lst/market_data.hpp"
#include "lst/pattern_bank.hpp"

namespace lst {

enum class KernelVariant { gaussian_l2, exp_similarity };

struct KernelChoice {
  KernelVariant variant = KernelVariant::exp_similarity;
  double c = 1.0;  // used by exp_similarity only

  void validate() const;
};

std::string to_string(KernelVariant v);
KernelVariant kernel_variant_from_string(const std::string& s);

/// Correlation similarity in [-1, 1] using population standard deviations.
/// Returns 0 when either vector is constant.
double similarity(std::span<const double> a, std::span<const double> b);

/// Per-pattern log kernel weight: -|x - x_i|^2 / 4 (gaussian_l2, x as given)
/// or c * s(x, x_i) (exp_similarity, x normalized first).
std::vector<double> log_kernel_scores(std::span<const double> x, const PatternBank& bank, const KernelChoice& kernel);

/// exp(log_scores) normalized to sum to one, shifted by the max for range.
std::vector<double> softmax(std::span<const double> log_scores);

std::vector<double> kernel_weights(std::span<const double> x, const PatternBank& bank, const KernelChoice& kernel);

/// Kernel-weighted mean of the bank labels.
double predict_label(std::span<const double> x, const PatternBank& bank, const KernelChoice& kernel);

/// Kernel mass on bank labels exactly equal to y.
double empirical_conditional(double y, std::span<const double> x, const PatternBank& bank, const KernelChoice& kernel);

/// 1 iff class-1 kernel mass exceeds class-0 mass. Labels must be 0 or 1.
int classify_binary(std::span<const double> x, const PatternBank& bank, const KernelChoice& kernel);
int classify_from_log_scores(std::span<const double> log_scores, std::span<const double> labels);

struct Features {
  std::array<double, 3> bank_dp{};  // predicted change per bank
  double imbalance = 0.0;
};

/// Features for the increment into bucket t. Windows are the M buckets
/// strictly before t; the imbalance is the one observed at t - 1.
Features assemble_features(std::size_t t, const PriceSeries& series, const BankSet& banks, const KernelChoice& kernel);

/// Smallest t for which assemble_features has enough history.
std::size_t first_feature_index(const BankSet& banks);

struct CombinerWeights {
  std::array<double, 5> w{};  // intercept, three bank coefficients, imbalance
  bool ridge = false;         // set when the design was rank deficient
};

inline constexpr double kRidgeLambda = 1e-8;

struct FitSample {
  Features features;
  double target = 0.0;
};

/// Least squares on [1, dp1, dp2, dp3, r] via the normal equations; falls
/// back to ridge with kRidgeLambda when the design is rank deficient.
CombinerWeights fit_weights(std::span<const FitSample> samples);

double predict_dp(const Features& f, const CombinerWeights& w);

/// Raw per-bank scores for every t in [first_t, first_t + count). For
/// exp_similarity these are similarities (c applied later), for gaussian_l2
/// they are log kernel weights. Scoring is parallel over t.
struct ScoreCache {
  KernelVariant variant = KernelVariant::exp_similarity;
  std::size_t first_t = 0;
  std::size_t count = 0;
  std::array<std::size_t, 3> bank_sizes{};
  std::array<std::vector<double>, 3> scores;  // count * bank_size, row per t
};

ScoreCache score_series(const PriceSeries& series, const BankSet& banks, KernelVariant variant, std::size_t first_t,
                        std::size_t count);

std::vector<Features> features_from_cache(const ScoreCache& cache, const BankSet& banks, double c,
                                          const PriceSeries& series);

struct Calibration {
  double c = 1.0;
  CombinerWeights weights;
  double mse = 0.0;
  std::vector<std::pair<double, double>> grid_mse;  // (c, in-sample MSE), ascending c
};

inline const std::vector<double> kDefaultCGrid{0.5, 1.0, 2.0, 4.0, 8.0};

/// Picks the c with the lowest in-sample MSE of the fitted combiner over the
/// fitting series; ties go to the smaller c.
Calibration calibrate_c(std::span<const double> grid, const PriceSeries& fit_series, const BankSet& banks,
                        KernelVariant variant = KernelVariant::exp_similarity);

struct PredictorModel {
  BankSet banks;
  KernelChoice kernel;
  CombinerWeights weights;
  double threshold = 0.0;
  std::vector<double> thresholds;
  double fit_mse = 0.0;
};

/// Predicted dp for every t in [first_feature_index, series.size()).
std::vector<double> predict_series(const PredictorModel& model, const PriceSeries& series);

/// model.json with bank file names stored relative to the model's directory.
void save_model(const std::string& path, const PredictorModel& model, const std::array<std::string, 3>& bank_files);
PredictorModel load_model(const std::string& path);

}  // namespace lst
