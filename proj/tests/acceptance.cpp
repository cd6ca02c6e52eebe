// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lst/bayes_regress.hpp"
#include "lst/evaluator.hpp"
#include "lst/kernels.hpp"
#include "lst/latent_source.hpp"
#include "lst/pipeline.hpp"
#include "lst/trader.hpp"

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

const std::string kPlanted = std::string(LST_SOURCE_DIR) + "/data/planted_3day.json";

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lst_accept_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Extended-precision Pearson correlation.
long double pearson(std::span<const double> a, std::span<const double> b) {
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// 1. Gaussian-kernel regression against the conditional-expectation sum.
Outcome kernel_regression_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> nd;
  const lst::KernelChoice g{lst::KernelVariant::gaussian_l2, 1.0};
  double worst = 0;
  for (int inst = 0; inst < 200; ++inst) {
    lst::PatternBank bank;
    std::vector<std::vector<double>> xs(20, std::vector<double>(180));
    std::vector<double> ys(20);
    const double spread = 0.05 + 0.1 * (inst % 5);
    std::vector<double> x(180);
    for (auto& e : x) e = nd(rng);
    for (std::size_t i = 0; i < 20; ++i) {
      for (std::size_t z = 0; z < 180; ++z) xs[i][z] = x[z] + spread * nd(rng);
      ys[i] = nd(rng);
      bank.add(xs[i], ys[i]);
    }
    long double num = 0, den = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      long double d2 = 0;
      for (std::size_t z = 0; z < 180; ++z) d2 += (static_cast<long double>(x[z]) - xs[i][z]) * (x[z] - xs[i][z]);
      const long double w = std::exp(-d2 / 4.0L);
      num += w * ys[i];
      den += w;
    }
    worst = std::max(worst, std::abs(lst::predict_label(x, bank, g) - static_cast<double>(num / den)));
  }
  const double secs = seconds_since(t0);
  o.require(worst <= 1e-12, "max error " + fmt(worst));
  o.require(secs < 5.0, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = "200 instances, max |err| " + fmt(worst) + ", " + fmt(secs) + " s";
  return o;
}

// 2. Similarity identities and the hand case.
Outcome similarity_correctness() {
  Outcome o;
  const auto t0 = Clock::now();
  const double hand = lst::similarity(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2});
  o.require(hand == 0.5, "hand case gave " + fmt(hand));
  std::mt19937_64 rng(202);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  std::uniform_int_distribution<int> dim(2, 720);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(static_cast<std::size_t>(dim(rng))), neg(a.size()), aff(a.size()), b(a.size());
    for (auto& v : a) v = nd(rng) * 5 + 3;
    for (auto& v : b) v = nd(rng);
    const double k = scale(rng), c = nd(rng) * 1000;
    for (std::size_t z = 0; z < a.size(); ++z) {
      neg[z] = -a[z];
      aff[z] = k * a[z] + c;
    }
    worst = std::max(worst, std::abs(lst::similarity(a, a) - 1.0));
    worst = std::max(worst, std::abs(lst::similarity(a, neg) + 1.0));
    worst = std::max(worst, std::abs(lst::similarity(aff, b) - lst::similarity(a, b)));
  }
  const double secs = seconds_since(t0);
  o.require(worst <= 1e-12, "max deviation " + fmt(worst));
  o.require(secs < 1.0, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = "hand case 0.5, 1000 vectors, max dev " + fmt(worst);
  return o;
}

// 3. Latent-source classification with parity labels.
Outcome latent_source_classification() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::normal_distribution<double> nd;
  lst::LatentSourceSpec spec;
  for (int s = 0; s < 5; ++s) {
    std::vector<double> v(180);
    for (auto& e : v) e = nd(rng);
    spec.sources.push_back(v);
    spec.label_dists.push_back(lst::PointMass{static_cast<double>(s % 2)});
  }
  spec.mix.assign(5, 0.2);
  const lst::KernelChoice g{lst::KernelVariant::gaussian_l2, 1.0};

  std::string summary;
  for (double sigma : {0.0, 0.1}) {
    spec.noise_sigma = sigma;
    spec.seed = sigma == 0.0 ? 11 : 12;
    const auto train = lst::generate_labeled(spec, 200);
    spec.seed += 100;
    const auto queries = lst::generate_labeled(spec, 500);
    lst::PatternBank bank;
    for (const auto& p : train) bank.add(p.x, p.y);

    std::size_t correct = 0, bayes = 0;
    for (const auto& q : queries) {
      correct += lst::classify_binary(q.x, bank, g) == static_cast<int>(q.y);
      // Brute-force Bayes rule with the true sources, mixture and noise.
      if (sigma == 0.0) {
        bayes += 1;
        continue;
      }
      std::vector<double> logs(5), labels(5);
      for (std::size_t s = 0; s < 5; ++s) {
        double d2 = 0;
        for (std::size_t z = 0; z < 180; ++z) d2 += std::pow(q.x[z] - spec.sources[s][z], 2);
        logs[s] = std::log(spec.mix[s]) - d2 / (2 * sigma * sigma);
        labels[s] = static_cast<double>(s % 2);
      }
      bayes += lst::classify_from_log_scores(logs, labels) == static_cast<int>(q.y);
    }
    const double acc = correct / 500.0, bacc = bayes / 500.0;
    if (sigma == 0.0) {
      o.require(correct == 500, "sigma 0 accuracy " + fmt(acc));
    } else {
      o.require(bacc >= 0.95, "Bayes rule accuracy " + fmt(bacc) + " leaves no margin");
      o.require(acc >= 0.95, "sigma 0.1 accuracy " + fmt(acc));
    }
    summary += (summary.empty() ? "" : ", ") + std::string("sigma ") + fmt(sigma) + ": " + fmt(100 * acc) + "%";
  }
  const double secs = seconds_since(t0);
  o.require(secs < 30.0, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = summary + ", " + fmt(secs) + " s";
  return o;
}

// 4. Combiner weight recovery.
Outcome weight_recovery() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::array<double, 5> w{0.02, 0.8, -0.35, 0.6, 1.7};
  std::string summary;
  for (double sigma : {0.0, 0.01}) {
    std::mt19937_64 rng(sigma == 0.0 ? 404 : 405);
    std::normal_distribution<double> nd;
    std::vector<lst::FitSample> s(10000);
    for (auto& e : s) {
      e.features.bank_dp = {nd(rng), nd(rng), nd(rng)};
      e.features.imbalance = nd(rng) * 0.3;
      e.target = w[0] + w[1] * e.features.bank_dp[0] + w[2] * e.features.bank_dp[1] + w[3] * e.features.bank_dp[2] +
                 w[4] * e.features.imbalance + sigma * nd(rng);
    }
    const auto fit = lst::fit_weights(s);
    double worst = 0;
    for (int j = 0; j < 5; ++j) worst = std::max(worst, std::abs(fit.w[j] - w[j]));
    const double tol = sigma == 0.0 ? 1e-8 : 1e-2;
    o.require(worst <= tol, "sigma " + fmt(sigma) + " max |w err| " + fmt(worst));
    summary += (summary.empty() ? "" : ", ") + std::string("sigma ") + fmt(sigma) + ": " + fmt(worst);
  }
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = "max |w err| " + summary;
  return o;
}

// 5. Sharpe hand case and scalar oracle.
Outcome sharpe_oracle() {
  Outcome o;
  const auto hand = lst::sharpe(std::vector<double>{2.0, 4.0}, 1.0);
  o.require(hand.defined && hand.value == 2.5, "hand case gave " + fmt(hand.value));
  std::mt19937_64 rng(505);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> len(2, 500);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> p(static_cast<std::size_t>(len(rng)));
    for (auto& v : p) v = nd(rng) * 4 + 0.5;
    const double c = std::abs(nd(rng)) * 20;
    long double sum = 0;
    for (double v : p) sum += v;
    const long double mean = sum / p.size();
    long double ss = 0;
    for (double v : p) ss += (v - mean) * (v - mean);
    const double ref = static_cast<double>((sum - c) / (p.size() * std::sqrt(ss / p.size())));
    worst = std::max(worst, std::abs(lst::sharpe(p, c).value - ref) / std::max(1.0, std::abs(ref)));
  }
  o.require(worst <= 1e-10, "max deviation " + fmt(worst));
  if (o.pass) o.detail = "(2,4), C=1 -> 2.5; 100 sequences, max dev " + fmt(worst);
  return o;
}

// 6. Trading rule transition table and boundedness.
Outcome state_machine() {
  Outcome o;
  const double t = 1.0;
  // Expected next position for dp above, inside and below the band.
  const int table[3][3] = {{0, -1, -1}, {1, 0, -1}, {1, 1, 0}};
  const double dps[3] = {2.0, 0.0, -2.0};
  for (int p = -1; p <= 1; ++p)
    for (int r = 0; r < 3; ++r) {
      const auto s = lst::step(lst::Position{p}, dps[r], t, 100.0);
      const int want = table[p + 1][r];
      o.require(s.position.units == want && s.trade.has_value() == (want != p),
                "pos " + std::to_string(p) + " dp " + fmt(dps[r]) + " -> " + std::to_string(s.position.units));
    }
  for (int p = -1; p <= 1; ++p) {
    o.require(!lst::step(lst::Position{p}, t, t, 1.0).trade, "dp == t traded");
    o.require(!lst::step(lst::Position{p}, -t, t, 1.0).trade, "dp == -t traded");
  }
  std::mt19937_64 rng(606);
  std::normal_distribution<double> nd;
  lst::Position pos;
  bool bounded = true;
  for (int i = 0; i < 1'000'000; ++i) {
    pos = lst::step(pos, nd(rng) * 2, t, 1.0).position;
    bounded &= pos.units >= -1 && pos.units <= 1;
  }
  o.require(bounded, "position left {-1, 0, +1}");
  if (o.pass) o.detail = "9 cases + band edges, 1e6 random steps bounded";
  return o;
}

// 7. Cash reconciles with round-trip profits plus liquidation P&L.
Outcome ledger_conservation(const std::vector<lst::BacktestReport>& extra) {
  Outcome o;
  std::vector<lst::BacktestReport> reps = extra;
  std::mt19937_64 rng(707);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 100; ++i) {
    lst::PriceSeries s;
    double p = 1000;
    for (int k = 0; k < 2000; ++k) {
      s.prices.push_back(p += nd(rng));
      s.imbalances.push_back(0.0);
    }
    std::vector<double> dp(s.size() - 720);
    for (auto& v : dp) v = nd(rng);
    reps.push_back(lst::simulate(dp, s, 720, 0.1 + 0.02 * i));
  }
  double worst = 0;
  for (const auto& r : reps) {
    double closed = 0;
    for (const auto& rt : r.round_trips)
      if (!rt.liquidation) closed += rt.profit;
    worst = std::max(worst, std::abs(closed + r.liquidation_pnl - r.final_cash));
  }
  o.require(worst <= 1e-9, "max imbalance " + fmt(worst));
  if (o.pass)
    o.detail = std::to_string(reps.size()) + " backtests (" + std::to_string(extra.size()) +
               " pipeline), max |diff| " + fmt(worst);
  return o;
}

lst::RunConfig planted_config(const fs::path& out, const std::string& spec) {
  lst::RunConfig cfg;
  cfg.spec_path = spec;
  cfg.out = out.string();
  cfg.seed = 1;
  return cfg;
}

struct SweepTrial {
  std::vector<lst::SweepRow> rows;
  lst::BacktestReport eval;
};

SweepTrial sweep_trial(double sigma, const std::string& tag) {
  const auto dir = scratch("sweep_" + tag);
  auto spec = lst::load_latent_spec(kPlanted);
  spec.noise_sigma = sigma;
  lst::save_latent_spec((dir / "spec.json").string(), spec);
  const auto cfg = planted_config(dir, (dir / "spec.json").string());
  const auto series = lst::stage_gen(cfg).series;
  const auto model = lst::stage_fit(cfg, series, lst::stage_build_banks(cfg, series));
  SweepTrial t{lst::stage_sweep(cfg, series, model), lst::stage_backtest(cfg, series, model)};
  fs::remove_all(dir);
  return t;
}

std::string describe(const std::vector<lst::SweepRow>& rows) {
  std::string s;
  for (const auto& r : rows)
    s += (s.empty() ? "" : " | ") + std::to_string(r.num_trades) + " trades @ " + fmt(r.avg_profit_per_trade);
  return s;
}

// 8. Threshold sweep: signal counts, trade counts and per-trade profit.
Outcome sweep_structure(std::vector<lst::BacktestReport>& reports) {
  Outcome o;
  auto check = [](const std::vector<lst::SweepRow>& rows, bool& signals, bool& trend) {
    signals = true;
    trend = true;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      signals &= rows[i].signal_count <= rows[i - 1].signal_count;
      trend &= rows[i].num_trades <= rows[i - 1].num_trades;
      trend &= rows[i].avg_profit_per_trade >= rows[i - 1].avg_profit_per_trade;
    }
  };
  auto noisy = sweep_trial(0.1, "noisy");
  reports.push_back(noisy.eval);
  bool signals = false, trend = false;
  check(noisy.rows, signals, trend);
  o.require(noisy.rows.size() >= 2, "sweep has fewer than 2 thresholds");
  o.require(signals, "signal counts increase somewhere");
  if (trend) {
    if (o.pass) o.detail = "sigma 0.1: " + describe(noisy.rows);
    return o;
  }
  auto clean = sweep_trial(0.0, "clean");
  reports.push_back(clean.eval);
  bool signals0 = false, trend0 = false;
  check(clean.rows, signals0, trend0);
  o.require(signals0, "signal counts increase somewhere at sigma 0");
  o.require(trend0, "trend violated at sigma 0.1 and sigma 0: " + describe(clean.rows));
  if (o.pass) o.detail = "sigma 0.1 violated trend, sigma 0: " + describe(clean.rows);
  return o;
}

// 9 and 10. Full pipeline on the zero-noise planted series, twice.
struct PipelineRuns {
  Outcome profit;
  Outcome determinism;
};

PipelineRuns pipeline_runs() {
  PipelineRuns r;
  const auto a = scratch("pipe_a"), b = scratch("pipe_b");
  double secs = 0;
  for (const auto& dir : {a, b}) {
    const std::vector<std::string> args{"pipeline", "--spec", kPlanted, "--seed", "1", "--out", dir.string()};
    std::ostringstream out, err;
    const auto t0 = Clock::now();
    const int code = lst::run_command(args, out, err);
    secs = std::max(secs, seconds_since(t0));
    r.profit.require(code == 0, "pipeline exit " + std::to_string(code) + ": " + err.str());
  }
  if (!r.profit.pass) {
    r.determinism = r.profit;
    return r;
  }
  const auto j = nlohmann::json::parse(slurp(a / "summary.json"));
  const double profit = j["total_profit"].get<double>();
  r.profit.require(profit > 0.0, "total profit " + fmt(profit) + " does not beat never-trade (0)");
  r.profit.require(secs < 120.0, "runtime " + fmt(secs) + " s");
  if (r.profit.pass)
    r.profit.detail = "profit " + fmt(profit) + " over " + std::to_string(j["num_trades"].get<int>()) +
                      " trades vs 0 for never-trade, " + fmt(secs) + " s";

  for (const char* f : {"summary.json", "sweep.csv", "equity_curve.csv", "cluster_centers.csv", "trades.csv"}) {
    const bool present = fs::exists(a / f) && fs::exists(b / f);
    r.determinism.require(present, std::string(f) + " missing");
    if (present) r.determinism.require(slurp(a / f) == slurp(b / f), std::string(f) + " differs");
  }
  if (r.determinism.pass) r.determinism.detail = "5 report files byte-identical across two runs";
  fs::remove_all(a);
  fs::remove_all(b);
  return r;
}

// 11. Similarity throughput at M = 360.
Outcome throughput() {
  Outcome o;
  const std::size_t dim = 360, nq = 1024, nb = 256;
  std::mt19937_64 rng(1111);
  std::normal_distribution<double> nd;
  std::vector<double> raw(nq * dim), queries(nq * dim), bank(nb * dim), out(nq * nb);
  for (auto& v : raw) v = nd(rng);
  for (std::size_t i = 0; i < nb; ++i) {
    std::vector<double> v(dim);
    for (auto& e : v) e = nd(rng);
    lst::normalize_into(v, std::span<double>(bank.data() + i * dim, dim));
  }
  double evals = 0, secs = 0;
  const auto t0 = Clock::now();
  while (secs < 1.0) {
    for (std::size_t q = 0; q < nq; ++q)
      lst::normalize_into(std::span<const double>(raw.data() + q * dim, dim),
                          std::span<double>(queries.data() + q * dim, dim));
    lst::kernels::batch_similarity_parallel(queries, bank, dim, out);
    evals += static_cast<double>(nq * nb);
    secs = seconds_since(t0);
  }
  const double rate = evals / secs;
  o.require(rate >= 1e6, "rate " + fmt(rate) + " evals/s");
  if (o.pass)
    o.detail = fmt(rate) + " evals/s at M=360 on " + std::to_string(lst::kernels::max_threads()) + " thread(s)";
  return o;
}

}  // namespace

int main() {
  lst::kernels::configure_threads_from_env();
  int failed = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      Outcome o;
      o.require(false, std::string("exception: ") + e.what());
      return o;
    }
  };

  report(1, "kernel regression oracle", guarded(kernel_regression_oracle));
  report(2, "similarity correctness", guarded(similarity_correctness));
  report(3, "latent-source classification", guarded(latent_source_classification));
  report(4, "weight recovery", guarded(weight_recovery));
  report(5, "sharpe oracle", guarded(sharpe_oracle));
  report(6, "state machine", guarded(state_machine));

  std::vector<lst::BacktestReport> pipeline_reports;
  const auto sweep = guarded([&] { return sweep_structure(pipeline_reports); });
  report(7, "ledger conservation", guarded([&] { return ledger_conservation(pipeline_reports); }));
  report(8, "threshold sweep structure", sweep);

  PipelineRuns runs;
  try {
    runs = pipeline_runs();
  } catch (const std::exception& e) {
    runs.profit.require(false, std::string("exception: ") + e.what());
    runs.determinism = runs.profit;
  }
  report(9, "planted end-to-end profit", runs.profit);
  report(10, "determinism", runs.determinism);
  report(11, "similarity throughput", guarded(throughput));

  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
