#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lst/bayes_regress.hpp"
#include "lst/trader.hpp"

namespace {

lst::PriceSeries walk(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  lst::PriceSeries s;
  double p = 1000;
  for (std::size_t i = 0; i < n; ++i) {
    s.prices.push_back(p += nd(rng));
    s.imbalances.push_back(0.0);
  }
  return s;
}

// Scalar replay: executes at bucket first_t + k - 1, closes at the last bucket.
double replay_profit(const std::vector<double>& dp, const lst::PriceSeries& s, std::size_t first_t, double th) {
  int pos = 0;
  double cash = 0;
  for (std::size_t k = 0; k < dp.size(); ++k) {
    const double px = s.prices[first_t + k - 1];
    if (dp[k] > th && pos <= 0) {
      ++pos;
      cash -= px;
    } else if (dp[k] < -th && pos >= 0) {
      --pos;
      cash += px;
    }
  }
  return cash + pos * s.prices.back();
}

}  // namespace

TEST(Step, TransitionTable) {
  const double t = 0.5;
  struct Case {
    int pos;
    double dp;
    int next;
    bool trade;
    lst::Side side;
  };
  const Case cases[] = {
      {-1, 0.9, 0, true, lst::Side::buy},   {0, 0.9, 1, true, lst::Side::buy},    {1, 0.9, 1, false, lst::Side::buy},
      {-1, 0.1, -1, false, lst::Side::buy}, {0, 0.1, 0, false, lst::Side::buy},   {1, 0.1, 1, false, lst::Side::buy},
      {-1, -0.9, -1, false, lst::Side::buy}, {0, -0.9, -1, true, lst::Side::sell}, {1, -0.9, 0, true, lst::Side::sell},
  };
  for (const auto& c : cases) {
    const auto r = lst::step(lst::Position{c.pos}, c.dp, t, 100.0, 7);
    EXPECT_EQ(r.position.units, c.next) << c.pos << " " << c.dp;
    ASSERT_EQ(r.trade.has_value(), c.trade) << c.pos << " " << c.dp;
    if (c.trade) {
      EXPECT_EQ(r.trade->side, c.side);
      EXPECT_EQ(r.trade->position_after, c.next);
      EXPECT_EQ(r.trade->price, 100.0);
      EXPECT_EQ(r.trade->time, 7u);
    }
  }
}

TEST(Step, ThresholdIsStrict) {
  for (int pos : {-1, 0, 1}) {
    EXPECT_FALSE(lst::step(lst::Position{pos}, 0.5, 0.5, 1.0).trade);
    EXPECT_FALSE(lst::step(lst::Position{pos}, -0.5, 0.5, 1.0).trade);
  }
  EXPECT_THROW(lst::step(lst::Position{0}, 1.0, 0.0, 1.0), std::invalid_argument);
}

TEST(Step, PositionStaysBoundedUnderRandomSteps) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd;
  lst::Position p;
  for (int i = 0; i < 1'000'000; ++i) {
    const auto r = lst::step(p, nd(rng), 0.3, 1.0);
    ASSERT_LE(std::abs(r.position.units - p.units), 1);
    ASSERT_GE(r.position.units, -1);
    ASSERT_LE(r.position.units, 1);
    p = r.position;
  }
}

TEST(Simulate, LedgerConservation) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = walk(500, 100 + trial);
    const std::size_t first_t = 1 + trial % 40;
    std::vector<double> dp(s.size() - first_t);
    for (auto& v : dp) v = nd(rng);
    const double th = 0.2 + 0.05 * (trial % 10);
    const auto rep = lst::simulate(dp, s, first_t, th);

    double closed = 0, all = 0;
    for (const auto& rt : rep.round_trips) {
      all += rt.profit;
      if (!rt.liquidation) closed += rt.profit;
    }
    EXPECT_NEAR(closed + rep.liquidation_pnl, rep.final_cash, 1e-9);
    EXPECT_NEAR(all, rep.final_cash, 1e-9);
    EXPECT_NEAR(rep.total_profit, rep.final_cash, 1e-9);
    EXPECT_NEAR(rep.cumulative_profit.back(), rep.final_cash, 1e-9);
    EXPECT_NEAR(rep.final_cash, replay_profit(dp, s, first_t, th), 1e-9);
    EXPECT_EQ(rep.trades.size() % 2, 0u);
    EXPECT_EQ(rep.trades.size(), 2 * rep.round_trips.size());

    // Every trade's cash flow reconstructs the final balance.
    double cash = 0;
    for (const auto& t : rep.trades) cash += t.side == lst::Side::buy ? -t.price : t.price;
    EXPECT_NEAR(cash, rep.final_cash, 1e-9);
  }
}

TEST(Simulate, ForcedBuySingleRoundTrip) {
  const auto s = walk(100, 7);
  std::vector<double> dp(90, 0.0);
  dp[0] = 10.0;
  const auto rep = lst::simulate(dp, s, 10, 1.0);
  ASSERT_EQ(rep.trades.size(), 2u);
  EXPECT_EQ(rep.trades[0].time, 9u);
  EXPECT_EQ(rep.trades[0].side, lst::Side::buy);
  EXPECT_TRUE(rep.trades[1].liquidation);
  EXPECT_EQ(rep.trades[1].time, 99u);
  EXPECT_DOUBLE_EQ(rep.total_profit, s.prices[99] - s.prices[9]);
  EXPECT_DOUBLE_EQ(rep.liquidation_pnl, rep.total_profit);
  ASSERT_EQ(rep.round_trips.size(), 1u);
  EXPECT_DOUBLE_EQ(rep.avg_holding_time, 90 * 10.0);
}

TEST(Simulate, ZeroWeightModelNeverTrades) {
  const auto s = walk(900, 8);
  lst::PredictorModel m;
  lst::BankConfig cfg;
  cfg.windows = {10, 20, 30};
  cfg.k = 4;
  cfg.m = 2;
  m.banks = lst::build_banks(s, cfg);
  const auto rep = lst::run_backtest(m, s, 1e-12);
  EXPECT_TRUE(rep.trades.empty());
  EXPECT_EQ(rep.total_profit, 0.0);
  EXPECT_EQ(rep.signal_count, 0u);
  EXPECT_FALSE(rep.sharpe.defined);
}

TEST(Simulate, InputValidation) {
  const auto s = walk(50, 9);
  std::vector<double> dp(40, 0.0);
  EXPECT_THROW(lst::simulate(dp, s, 9, 1.0), std::invalid_argument);
  EXPECT_THROW(lst::simulate(dp, s, 10, 0.0), std::invalid_argument);
  std::vector<double> dp50(50, 0.0);
  EXPECT_THROW(lst::simulate(dp50, s, 0, 1.0), std::invalid_argument);
}

TEST(TradesCsv, Format) {
  const auto s = walk(20, 10);
  std::vector<double> dp(10, 0.0);
  dp[0] = 1.0;
  dp[3] = -1.0;
  const auto rep = lst::simulate(dp, s, 10, 0.5);
  std::ostringstream out;
  lst::write_trades_csv(out, rep.trades);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "time,side,price,position_after,round_trip_profit");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 6), "9,buy,");
  EXPECT_EQ(line.back(), ',');
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 8), "12,sell,");
}
