#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lst/pattern_bank.hpp"
#include "lst/trader.hpp"

namespace lst {

/// sqrt_std divides by the standard deviation of the per-trip profits;
/// paper_literal divides by the mean squared deviation (no root).
enum class SharpeVariant { sqrt_std, paper_literal };

std::string to_string(SharpeVariant v);
SharpeVariant sharpe_variant_from_string(const std::string& s);

/// (sum(p) - drift) / (L * sigma_p). Undefined (NaN, defined = false) for
/// L < 2 or zero dispersion.
SharpeResult sharpe(std::span<const double> profits, double drift, SharpeVariant variant = SharpeVariant::sqrt_std);

/// Fills the derived metrics of a report from its ledger.
void summarize(BacktestReport& report);

struct SweepRow {
  double threshold = 0.0;
  std::size_t num_trades = 0;
  std::size_t num_round_trips = 0;
  std::size_t signal_count = 0;
  double avg_holding_time = 0.0;  // seconds
  double avg_profit_per_trade = 0.0;  // per round trip
  double total_profit = 0.0;
  SharpeResult sharpe;
};

SweepRow sweep_row(const BacktestReport& report, SharpeVariant variant = SharpeVariant::sqrt_std);

/// One simulation per threshold over a shared dp stream. Thresholds must be
/// strictly increasing and positive.
std::vector<SweepRow> sweep_thresholds(std::span<const double> dp, const PriceSeries& series, std::size_t first_t,
                                       std::span<const double> thresholds,
                                       SharpeVariant variant = SharpeVariant::sqrt_std);
std::vector<SweepRow> sweep_thresholds(const PredictorModel& model, const PriceSeries& series,
                                       std::span<const double> thresholds,
                                       SharpeVariant variant = SharpeVariant::sqrt_std);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_equity_csv(std::ostream& out, const BacktestReport& report);
void write_cluster_centers_csv(std::ostream& out, const BankSet& banks);
std::string summary_json(const BacktestReport& report, SharpeVariant variant);

/// Writes summary.json, sweep.csv, equity_curve.csv, cluster_centers.csv and
/// trades.csv into `dir` (created if missing).
void emit_report(const std::string& dir, const BacktestReport& report, std::span<const SweepRow> sweep,
                 const BankSet& banks, SharpeVariant variant = SharpeVariant::sqrt_std);

}  // namespace lst
