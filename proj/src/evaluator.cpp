#include "lst/evaluator.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "lst/format.hpp"

namespace lst {

std::string to_string(SharpeVariant v) { return v == SharpeVariant::sqrt_std ? "sqrt" : "paper-literal"; }

SharpeVariant sharpe_variant_from_string(const std::string& s) {
  if (s == "sqrt") return SharpeVariant::sqrt_std;
  if (s == "paper-literal") return SharpeVariant::paper_literal;
  throw std::invalid_argument("unknown sharpe variant '" + s + "' (expected sqrt or paper-literal)");
}

SharpeResult sharpe(std::span<const double> profits, double drift, SharpeVariant variant) {
  const std::size_t n = profits.size();
  SharpeResult r{std::numeric_limits<double>::quiet_NaN(), false};
  if (n < 2) return r;
  double sum = 0.0;
  for (double p : profits) sum += p;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double p : profits) ss += (p - mean) * (p - mean);
  const double msd = ss / static_cast<double>(n);
  const double sigma = variant == SharpeVariant::sqrt_std ? std::sqrt(msd) : msd;
  if (!(sigma > 0.0)) return r;
  r.value = (sum - drift) / (static_cast<double>(n) * sigma);
  r.defined = true;
  return r;
}

void summarize(BacktestReport& rep) {
  rep.num_trades = rep.trades.size();
  rep.total_profit = 0.0;
  for (double p : rep.round_trip_profits) rep.total_profit += p;

  double hold = 0.0, invest = 0.0;
  for (const auto& rt : rep.round_trips) {
    hold += static_cast<double>(rt.exit_time - rt.entry_time) * rep.interval;
    invest += rt.entry_price;
  }
  const auto trips = static_cast<double>(rep.round_trips.size());
  rep.avg_holding_time = rep.round_trips.empty() ? 0.0 : hold / trips;
  rep.avg_investment = rep.round_trips.empty() ? 0.0 : invest / trips;
  rep.return_pct = rep.avg_investment > 0.0 ? 100.0 * rep.total_profit / rep.avg_investment : 0.0;

  if (!rep.prices.empty() && rep.first_t >= 1 && rep.first_t <= rep.prices.size())
    rep.drift = std::abs(rep.prices.back() - rep.prices[rep.first_t - 1]);
  rep.sharpe = sharpe(rep.round_trip_profits, rep.drift, SharpeVariant::sqrt_std);
  rep.sharpe_paper_literal = sharpe(rep.round_trip_profits, rep.drift, SharpeVariant::paper_literal);
}

SweepRow sweep_row(const BacktestReport& rep, SharpeVariant variant) {
  SweepRow row;
  row.threshold = rep.threshold;
  row.num_trades = rep.num_trades;
  row.num_round_trips = rep.round_trips.size();
  row.signal_count = rep.signal_count;
  row.avg_holding_time = rep.avg_holding_time;
  row.total_profit = rep.total_profit;
  row.avg_profit_per_trade = row.num_round_trips ? rep.total_profit / static_cast<double>(row.num_round_trips) : 0.0;
  row.sharpe = variant == SharpeVariant::sqrt_std ? rep.sharpe : rep.sharpe_paper_literal;
  return row;
}

std::vector<SweepRow> sweep_thresholds(std::span<const double> dp, const PriceSeries& series, std::size_t first_t,
                                       std::span<const double> thresholds, SharpeVariant variant) {
  if (thresholds.empty()) throw std::invalid_argument("sweep: no thresholds");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0)) throw std::invalid_argument("sweep: thresholds must be positive");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw std::invalid_argument("sweep: thresholds must be strictly increasing");
  }
  std::vector<SweepRow> rows(thresholds.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(thresholds.size()); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    rows[ii] = sweep_row(simulate(dp, series, first_t, thresholds[ii]), variant);
  }
  return rows;
}

std::vector<SweepRow> sweep_thresholds(const PredictorModel& model, const PriceSeries& series,
                                       std::span<const double> thresholds, SharpeVariant variant) {
  const auto dp = predict_series(model, series);
  return sweep_thresholds(dp, series, first_feature_index(model.banks), thresholds, variant);
}

namespace {

std::string fmt_sharpe(const SharpeResult& s) { return s.defined ? fmt_double(s.value) : "nan"; }

nlohmann::json json_number(const SharpeResult& s) {
  return s.defined ? nlohmann::json(s.value) : nlohmann::json(nullptr);
}

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  w(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "threshold,num_trades,avg_holding_s,avg_profit,total_profit,sharpe\n";
  for (const auto& r : rows)
    out << fmt_double(r.threshold) << ',' << r.num_trades << ',' << fmt_double(r.avg_holding_time) << ','
        << fmt_double(r.avg_profit_per_trade) << ',' << fmt_double(r.total_profit) << ',' << fmt_sharpe(r.sharpe)
        << '\n';
}

void write_equity_csv(std::ostream& out, const BacktestReport& rep) {
  out << "bucket_time,price,cum_profit\n";
  for (std::size_t i = 0; i < rep.prices.size(); ++i)
    out << fmt_double(rep.start_time + static_cast<double>(i) * rep.interval) << ',' << fmt_double(rep.prices[i])
        << ',' << fmt_double(rep.cumulative_profit[i]) << '\n';
}

void write_cluster_centers_csv(std::ostream& out, const BankSet& banks) {
  out << "bank,label,values\n";
  for (std::size_t j = 0; j < banks.size(); ++j) {
    for (std::size_t i = 0; i < banks[j].size(); ++i) {
      out << 'S' << (j + 1) << ',' << fmt_double(banks[j].labels[i]);
      for (double v : banks[j].pattern(i)) out << ',' << fmt_double(v);
      out << '\n';
    }
  }
}

std::string summary_json(const BacktestReport& rep, SharpeVariant variant) {
  nlohmann::json j;
  j["total_profit"] = rep.total_profit;
  j["num_trades"] = rep.num_trades;
  j["num_round_trips"] = rep.round_trips.size();
  j["avg_investment"] = rep.avg_investment;
  j["return_pct"] = rep.return_pct;
  j["avg_holding_time_s"] = rep.avg_holding_time;
  const auto& chosen = variant == SharpeVariant::sqrt_std ? rep.sharpe : rep.sharpe_paper_literal;
  j["sharpe"] = json_number(chosen);
  j["sharpe_defined"] = chosen.defined;
  j["sharpe_variant"] = to_string(variant);
  if (variant == SharpeVariant::paper_literal) {
    j["sharpe_sqrt"] = json_number(rep.sharpe);
    j["sharpe_paper_literal"] = json_number(rep.sharpe_paper_literal);
  }
  j["threshold"] = rep.threshold;
  j["drift_C"] = rep.drift;
  j["liquidation_pnl"] = rep.liquidation_pnl;
  j["final_cash"] = rep.final_cash;
  j["signal_count"] = rep.signal_count;
  j["first_bucket"] = rep.first_t;
  j["num_buckets"] = rep.prices.size();
  return j.dump(2);
}

void emit_report(const std::string& dir, const BacktestReport& report, std::span<const SweepRow> sweep,
                 const BankSet& banks, SharpeVariant variant) {
  const std::filesystem::path root(dir);
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
  write_file(root / "summary.json", [&](std::ostream& o) { o << summary_json(report, variant) << '\n'; });
  write_file(root / "sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, sweep); });
  write_file(root / "equity_curve.csv", [&](std::ostream& o) { write_equity_csv(o, report); });
  write_file(root / "cluster_centers.csv", [&](std::ostream& o) { write_cluster_centers_csv(o, banks); });
  write_file(root / "trades.csv", [&](std::ostream& o) { write_trades_csv(o, report.trades); });
}

}  // namespace lst
