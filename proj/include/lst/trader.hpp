#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "lst/bayes_regress.hpp"
#include "lst/market_data.hpp"

namespace lst {

enum class Side { buy, sell };

const char* to_string(Side s);

/// Net holding in units of the traded asset; always -1, 0 or +1.
struct Position {
  int units = 0;
};

struct Trade {
  std::size_t time = 0;  // bucket index of execution
  Side side = Side::buy;
  double price = 0.0;
  int position_after = 0;
  std::optional<double> round_trip_profit;  // set when the trade closes a round trip
  bool liquidation = false;
};

struct StepResult {
  Position position;
  std::optional<Trade> trade;  // round_trip_profit left unset
};

/// Threshold rule: buy one unit when dp > threshold and units <= 0, sell one
/// when dp < -threshold and units >= 0, otherwise hold.
StepResult step(Position position, double dp, double threshold, double price, std::size_t time = 0);

struct RoundTrip {
  std::size_t entry_time = 0;
  std::size_t exit_time = 0;
  double entry_price = 0.0;
  double exit_price = 0.0;
  int direction = 0;  // +1 long, -1 short
  double profit = 0.0;
  bool liquidation = false;
};

/// Cash/position book-keeping for a single-unit strategy. Cash starts at 0.
class Account {
 public:
  /// Records a trade produced by step(); fills in round_trip_profit.
  void apply(Trade& trade);
  /// Closes any open position at `price`; returns the forced trade if any.
  std::optional<Trade> liquidate(std::size_t time, double price);

  Position position() const { return position_; }
  double cash() const { return cash_; }
  double mark_to_market(double price) const { return cash_ + position_.units * price; }
  const std::vector<Trade>& trades() const { return trades_; }
  const std::vector<RoundTrip>& round_trips() const { return round_trips_; }

 private:
  Position position_;
  double cash_ = 0.0;
  std::size_t entry_time_ = 0;
  double entry_price_ = 0.0;
  std::vector<Trade> trades_;
  std::vector<RoundTrip> round_trips_;
};

struct SharpeResult {
  double value = 0.0;
  bool defined = false;  // false when fewer than 2 round trips or zero dispersion
};

struct BacktestReport {
  double interval = kDefaultInterval;
  double start_time = 0.0;
  double threshold = 0.0;
  std::size_t first_t = 0;        // first bucket with a prediction
  std::vector<double> dp;         // prediction for buckets first_t..end
  std::vector<double> prices;     // evaluation series prices
  std::vector<Trade> trades;
  std::vector<RoundTrip> round_trips;
  std::vector<double> round_trip_profits;
  std::vector<double> cumulative_profit;  // mark-to-market, one per bucket
  std::size_t signal_count = 0;           // buckets with |dp| > threshold
  double final_cash = 0.0;
  double liquidation_pnl = 0.0;

  // Derived metrics (filled by summarize()).
  double total_profit = 0.0;
  std::size_t num_trades = 0;
  double avg_holding_time = 0.0;  // seconds
  double avg_investment = 0.0;    // mean entry price over round trips
  double return_pct = 0.0;
  double drift = 0.0;             // C: |end price - start price| of the trading interval
  SharpeResult sharpe;
  SharpeResult sharpe_paper_literal;
};

/// Replays a precomputed dp stream: prediction k targets the increment into
/// bucket first_t + k and executes at bucket first_t + k - 1. Open positions
/// are liquidated at the final bucket.
BacktestReport simulate(std::span<const double> dp, const PriceSeries& series, std::size_t first_t, double threshold);

/// Causal backtest of the model over `series`.
BacktestReport run_backtest(const PredictorModel& model, const PriceSeries& series, double threshold);

void write_trades_csv(std::ostream& out, std::span<const Trade> trades);

}  // namespace lst
