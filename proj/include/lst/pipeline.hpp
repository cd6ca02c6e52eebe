#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lst/bayes_regress.hpp"
#include "lst/evaluator.hpp"
#include "lst/latent_source.hpp"
#include "lst/pattern_bank.hpp"

namespace lst {

struct RunConfig {
  std::string spec_path;    // synthetic source (gen / pipeline)
  std::string ticks_path;   // raw ticks (ingest / pipeline)
  std::string series_path;  // coarsened series; defaults to <out>/series.csv
  std::string model_path;   // defaults to <out>/model.json
  std::string out = ".";
  double duration = 3.0 * 86400.0;
  double interval = kDefaultInterval;
  std::array<std::size_t, 3> windows = kDefaultWindows;
  std::size_t k = 100;
  std::size_t m = 20;
  std::size_t stride = 1;
  std::size_t max_iters = 100;
  std::vector<double> c_grid = kDefaultCGrid;
  std::vector<double> thresholds;   // empty: derived from the fitting period
  std::optional<double> threshold;  // empty: chosen on the fitting period
  std::array<double, 3> split{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::uint64_t seed = 0;
  KernelVariant kernel = KernelVariant::exp_similarity;
  SharpeVariant sharpe_variant = SharpeVariant::sqrt_std;

  void validate() const;
  std::string resolved_series() const;
  std::string resolved_model() const;
};

/// Contiguous, disjoint bucket ranges for bank building, fitting and evaluation.
struct Periods {
  std::size_t total = 0;
  std::array<std::size_t, 3> first{};
  std::array<std::size_t, 3> count{};
};

/// floor(n * f) buckets for the first two periods, the remainder to the last.
Periods split_periods(std::size_t n, const std::array<double, 3>& fractions);

/// Stage seed derived from the run seed (splitmix64 of seed + stage).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage);

/// Sweep grid from quantiles of |dp| on the fitting period.
std::vector<double> default_thresholds(std::span<const double> dp);

/// Threshold from `grid` with the largest in-sample profit; ties to the smaller.
double select_threshold(std::span<const double> dp, const PriceSeries& series, std::size_t first_t,
                        std::span<const double> grid);

SyntheticSeries stage_gen(const RunConfig& cfg);
PriceSeries stage_ingest(const RunConfig& cfg);
BankSet stage_build_banks(const RunConfig& cfg, const PriceSeries& full);
PredictorModel stage_fit(const RunConfig& cfg, const PriceSeries& full, BankSet banks);
BacktestReport stage_backtest(const RunConfig& cfg, const PriceSeries& full, const PredictorModel& model);
std::vector<SweepRow> stage_sweep(const RunConfig& cfg, const PriceSeries& full, const PredictorModel& model);
void stage_report(const RunConfig& cfg, const PriceSeries& full, const PredictorModel& model);
void run_pipeline(const RunConfig& cfg);

/// Entry point behind the `lst` executable. Returns the process exit status.
int run_command(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace lst
