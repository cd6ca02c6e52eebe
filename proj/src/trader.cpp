#include "lst/trader.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "lst/evaluator.hpp"
#include "lst/format.hpp"

namespace lst {

const char* to_string(Side s) { return s == Side::buy ? "buy" : "sell"; }

StepResult step(Position position, double dp, double threshold, double price, std::size_t time) {
  if (!(threshold > 0.0)) throw std::invalid_argument("step: threshold must be positive");
  StepResult r{position, std::nullopt};
  if (dp > threshold && position.units <= 0) {
    r.position.units = position.units + 1;
    r.trade = Trade{time, Side::buy, price, r.position.units, std::nullopt, false};
  } else if (dp < -threshold && position.units >= 0) {
    r.position.units = position.units - 1;
    r.trade = Trade{time, Side::sell, price, r.position.units, std::nullopt, false};
  }
  return r;
}

void Account::apply(Trade& trade) {
  const int before = position_.units;
  const int delta = trade.side == Side::buy ? 1 : -1;
  if (trade.position_after != before + delta || trade.position_after < -1 || trade.position_after > 1)
    throw std::logic_error("account: trade inconsistent with position");
  cash_ += trade.side == Side::buy ? -trade.price : trade.price;
  position_.units = trade.position_after;
  if (before == 0) {
    entry_time_ = trade.time;
    entry_price_ = trade.price;
  } else {
    // Single-unit moves from +-1 always land on 0 and close the round trip.
    RoundTrip rt{entry_time_, trade.time, entry_price_, trade.price, before, before * (trade.price - entry_price_),
                 trade.liquidation};
    trade.round_trip_profit = rt.profit;
    round_trips_.push_back(rt);
  }
  trades_.push_back(trade);
}

std::optional<Trade> Account::liquidate(std::size_t time, double price) {
  if (position_.units == 0) return std::nullopt;
  Trade t{time, position_.units > 0 ? Side::sell : Side::buy, price, 0, std::nullopt, true};
  apply(t);
  return t;
}

BacktestReport simulate(std::span<const double> dp, const PriceSeries& series, std::size_t first_t, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("backtest: threshold must be positive");
  if (first_t == 0 || first_t + dp.size() != series.size())
    throw std::invalid_argument("backtest: dp stream does not cover buckets first_t..end");

  BacktestReport rep;
  rep.interval = series.interval;
  rep.start_time = series.start_time;
  rep.threshold = threshold;
  rep.first_t = first_t;
  rep.dp.assign(dp.begin(), dp.end());
  rep.prices = series.prices;
  rep.cumulative_profit.assign(series.size(), 0.0);

  Account account;
  for (std::size_t k = 0; k < dp.size(); ++k) {
    const std::size_t exec = first_t + k - 1;
    if (std::abs(dp[k]) > threshold) ++rep.signal_count;
    auto r = step(account.position(), dp[k], threshold, series.prices[exec], exec);
    if (r.trade) account.apply(*r.trade);
    rep.cumulative_profit[exec] = account.mark_to_market(series.prices[exec]);
  }
  const std::size_t last = series.size() - 1;
  if (account.liquidate(last, series.prices[last])) rep.liquidation_pnl = account.round_trips().back().profit;
  rep.cumulative_profit[last] = account.mark_to_market(series.prices[last]);

  rep.trades = account.trades();
  rep.round_trips = account.round_trips();
  for (const auto& rt : rep.round_trips) rep.round_trip_profits.push_back(rt.profit);
  rep.final_cash = account.cash();
  summarize(rep);
  return rep;
}

BacktestReport run_backtest(const PredictorModel& model, const PriceSeries& series, double threshold) {
  const auto dp = predict_series(model, series);
  return simulate(dp, series, first_feature_index(model.banks), threshold);
}

void write_trades_csv(std::ostream& out, std::span<const Trade> trades) {
  out << "time,side,price,position_after,round_trip_profit\n";
  for (const auto& t : trades) {
    out << t.time << ',' << to_string(t.side) << ',' << fmt_double(t.price) << ',' << t.position_after << ',';
    if (t.round_trip_profit) out << fmt_double(*t.round_trip_profit);
    out << '\n';
  }
}

}  // namespace lst
