#include "lst/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "lst/format.hpp"
#include "lst/kernels.hpp"

namespace lst {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 3> kBankFiles{"bank_S1.json", "bank_S2.json", "bank_S3.json"};
constexpr std::array<double, 4> kThresholdQuantiles{0.1, 0.25, 0.5, 0.75};

enum Stage : std::uint64_t { kStageGen = 1, kStageBanks = 2 };

fs::path out_path(const RunConfig& cfg, const char* name) { return fs::path(cfg.out) / name; }

void ensure_out(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + cfg.out + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

Periods checked_periods(const RunConfig& cfg, const PriceSeries& full) {
  const Periods p = split_periods(full.size(), cfg.split);
  // Strict temporal split: each period starts where the previous one ended.
  if (p.first[0] != 0 || p.first[1] != p.first[0] + p.count[0] || p.first[2] != p.first[1] + p.count[1] ||
      p.first[2] + p.count[2] != full.size())
    throw std::logic_error("period split is not a contiguous partition");
  return p;
}

PriceSeries period(const RunConfig& cfg, const PriceSeries& full, std::size_t which) {
  const Periods p = checked_periods(cfg, full);
  return full.slice(p.first[which], p.count[which]);
}

std::vector<double> resolve_thresholds(const RunConfig& cfg, const PredictorModel& model) {
  return cfg.thresholds.empty() ? model.thresholds : cfg.thresholds;
}

double resolve_threshold(const RunConfig& cfg, const PredictorModel& model) {
  return cfg.threshold ? *cfg.threshold : model.threshold;
}

}  // namespace

void RunConfig::validate() const {
  double total = 0.0;
  for (double f : split) {
    if (!(f > 0.0)) throw std::invalid_argument("--split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("--split fractions must sum to 1");
  if (!(interval > 0.0)) throw std::invalid_argument("--interval must be positive");
  if (k == 0 || m == 0) throw std::invalid_argument("--k and --m must be >= 1");
  if (stride == 0) throw std::invalid_argument("--stride must be >= 1");
  if (c_grid.empty()) throw std::invalid_argument("--c-grid must not be empty");
  for (double c : c_grid)
    if (!(c > 0.0)) throw std::invalid_argument("--c-grid values must be positive");
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    if (!(thresholds[i] > 0.0) || (i > 0 && !(thresholds[i] > thresholds[i - 1])))
      throw std::invalid_argument("--thresholds must be positive and strictly increasing");
  if (threshold && !(*threshold > 0.0)) throw std::invalid_argument("--threshold must be positive");
  for (std::size_t w : windows)
    if (w < 2) throw std::invalid_argument("--windows entries must be >= 2");
}

std::string RunConfig::resolved_series() const {
  return series_path.empty() ? (fs::path(out) / "series.csv").string() : series_path;
}

std::string RunConfig::resolved_model() const {
  return model_path.empty() ? (fs::path(out) / "model.json").string() : model_path;
}

Periods split_periods(std::size_t n, const std::array<double, 3>& fractions) {
  Periods p;
  p.total = n;
  p.count[0] = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions[0] + 1e-9));
  p.count[1] = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions[1] + 1e-9));
  if (p.count[0] + p.count[1] > n) throw std::invalid_argument("split fractions exceed the series");
  p.count[2] = n - p.count[0] - p.count[1];
  p.first = {0, p.count[0], p.count[0] + p.count[1]};
  return p;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage) {
  std::uint64_t z = seed + stage * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> default_thresholds(std::span<const double> dp) {
  std::vector<double> mag(dp.size());
  std::transform(dp.begin(), dp.end(), mag.begin(), [](double v) { return std::abs(v); });
  std::sort(mag.begin(), mag.end());
  std::vector<double> grid;
  for (double q : kThresholdQuantiles) {
    if (mag.empty()) break;
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(mag.size() - 1)));
    const double v = mag[idx];
    if (v > 0.0 && (grid.empty() || v > grid.back())) grid.push_back(v);
  }
  if (grid.empty()) grid.push_back(1e-12);  // flat prediction stream: never trades
  return grid;
}

double select_threshold(std::span<const double> dp, const PriceSeries& series, std::size_t first_t,
                        std::span<const double> grid) {
  const auto rows = sweep_thresholds(dp, series, first_t, grid);
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].total_profit > rows[best].total_profit) best = i;
  return rows[best].threshold;
}

SyntheticSeries stage_gen(const RunConfig& cfg) {
  if (cfg.spec_path.empty()) throw std::invalid_argument("gen: --spec is required");
  auto spec = load_latent_spec(cfg.spec_path);
  spec.interval = cfg.interval;
  auto syn = generate_price_series(spec, cfg.duration, derive_seed(cfg.seed, kStageGen));
  ensure_out(cfg);
  save_series(cfg.resolved_series(), syn.series);
  std::string emb = "start,length,source\n";
  for (const auto& e : syn.embeddings)
    emb += std::to_string(e.start) + ',' + std::to_string(e.length) + ',' + std::to_string(e.source) + '\n';
  write_text(out_path(cfg, "embeddings.csv"), emb);
  return syn;
}

PriceSeries stage_ingest(const RunConfig& cfg) {
  if (cfg.ticks_path.empty()) throw std::invalid_argument("ingest: --ticks is required");
  std::ifstream in(cfg.ticks_path);
  if (!in) throw std::runtime_error("cannot open " + cfg.ticks_path);
  const auto ticks = parse_ticks(in);
  if (ticks.empty()) throw std::runtime_error("ingest: " + cfg.ticks_path + " contains no ticks");
  auto series = coarsen(ticks, cfg.interval);
  ensure_out(cfg);
  save_series(cfg.resolved_series(), series);
  return series;
}

BankSet stage_build_banks(const RunConfig& cfg, const PriceSeries& full) {
  const Periods p = checked_periods(cfg, full);
  nlohmann::json pj;
  pj["total"] = p.total;
  pj["train"] = {p.first[0], p.first[0] + p.count[0]};
  pj["fit"] = {p.first[1], p.first[1] + p.count[1]};
  pj["eval"] = {p.first[2], p.first[2] + p.count[2]};
  std::clog << "[lst] periods (bucket ranges, half-open): train [" << p.first[0] << ", " << p.first[1] << ") fit ["
            << p.first[1] << ", " << p.first[2] << ") eval [" << p.first[2] << ", " << p.total << ")\n";

  BankConfig bc;
  bc.windows = cfg.windows;
  bc.k = cfg.k;
  bc.m = cfg.m;
  bc.stride = cfg.stride;
  bc.max_iters = cfg.max_iters;
  bc.seed = derive_seed(cfg.seed, kStageBanks);
  auto banks = build_banks(full.slice(p.first[0], p.count[0]), bc);

  ensure_out(cfg);
  write_text(out_path(cfg, "periods.json"), pj.dump(2) + '\n');
  for (std::size_t j = 0; j < 3; ++j) save_bank(out_path(cfg, kBankFiles[j]).string(), banks[j]);
  return banks;
}

PredictorModel stage_fit(const RunConfig& cfg, const PriceSeries& full, BankSet banks) {
  const PriceSeries fit_series = period(cfg, full, 1);
  const auto cal = calibrate_c(cfg.c_grid, fit_series, banks, cfg.kernel);
  for (const auto& [c, mse] : cal.grid_mse) std::clog << "[lst] c = " << c << " in-sample mse = " << mse << '\n';

  PredictorModel model;
  model.banks = std::move(banks);
  model.kernel = {cfg.kernel, cal.c};
  for (auto& b : model.banks) b.kernel_c = cal.c;
  model.weights = cal.weights;
  model.fit_mse = cal.mse;

  const auto dp = predict_series(model, fit_series);
  const std::size_t first = first_feature_index(model.banks);
  model.thresholds = cfg.thresholds.empty() ? default_thresholds(dp) : cfg.thresholds;
  model.threshold = cfg.threshold ? *cfg.threshold : select_threshold(dp, fit_series, first, model.thresholds);

  ensure_out(cfg);
  save_model(cfg.resolved_model(), model, {kBankFiles[0], kBankFiles[1], kBankFiles[2]});
  return model;
}

BacktestReport stage_backtest(const RunConfig& cfg, const PriceSeries& full, const PredictorModel& model) {
  return run_backtest(model, period(cfg, full, 2), resolve_threshold(cfg, model));
}

std::vector<SweepRow> stage_sweep(const RunConfig& cfg, const PriceSeries& full, const PredictorModel& model) {
  const auto grid = resolve_thresholds(cfg, model);
  return sweep_thresholds(model, period(cfg, full, 2), grid, cfg.sharpe_variant);
}

void stage_report(const RunConfig& cfg, const PriceSeries& full, const PredictorModel& model) {
  const PriceSeries eval = period(cfg, full, 2);
  const auto dp = predict_series(model, eval);
  const std::size_t first = first_feature_index(model.banks);
  const auto report = simulate(dp, eval, first, resolve_threshold(cfg, model));
  const auto grid = resolve_thresholds(cfg, model);
  const auto rows = sweep_thresholds(dp, eval, first, grid, cfg.sharpe_variant);
  emit_report(cfg.out, report, rows, model.banks, cfg.sharpe_variant);
  std::clog << "[lst] eval: threshold " << report.threshold << ", " << report.num_trades << " trades, profit "
            << report.total_profit << '\n';
}

void run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  PriceSeries series;
  if (!cfg.spec_path.empty())
    series = stage_gen(cfg).series;
  else if (!cfg.ticks_path.empty())
    series = stage_ingest(cfg);
  else
    series = load_series(cfg.resolved_series());
  auto banks = stage_build_banks(cfg, series);
  const auto model = stage_fit(cfg, series, std::move(banks));
  stage_report(cfg, series, model);
}

// ---- command line ---------------------------------------------------------

namespace {

struct Flags {
  std::vector<double> split;
  std::vector<std::size_t> windows;
  std::string kernel = "exp_similarity";
  std::string sharpe = "sqrt";
  double threshold = 0.0;
};

void add_common(CLI::App* cmd, RunConfig& cfg, Flags& flags) {
  cmd->add_option("--out", cfg.out, "Output directory");
  cmd->add_option("--series", cfg.series_path, "Coarsened series CSV (default <out>/series.csv)");
  cmd->add_option("--model", cfg.model_path, "Model JSON (default <out>/model.json)");
  cmd->add_option("--spec", cfg.spec_path, "Latent-source spec JSON");
  cmd->add_option("--ticks", cfg.ticks_path, "Tick CSV");
  cmd->add_option("--duration", cfg.duration, "Synthetic series duration in seconds");
  cmd->add_option("--interval", cfg.interval, "Grid interval in seconds");
  cmd->add_option("--windows", flags.windows, "Window lengths in buckets")->delimiter(',')->expected(3);
  cmd->add_option("--k", cfg.k, "k-means cluster count");
  cmd->add_option("--m", cfg.m, "Clusters kept per bank");
  cmd->add_option("--stride", cfg.stride, "Window extraction stride");
  cmd->add_option("--max-iters", cfg.max_iters, "k-means iteration cap");
  cmd->add_option("--c-grid", cfg.c_grid, "Kernel constant grid")->delimiter(',');
  cmd->add_option("--thresholds", cfg.thresholds, "Sweep thresholds (strictly increasing)")->delimiter(',');
  cmd->add_option("--threshold", flags.threshold, "Trading threshold for the backtest");
  cmd->add_option("--split", flags.split, "Period fractions")->delimiter(',')->expected(3);
  cmd->add_option("--seed", cfg.seed, "Run seed");
  cmd->add_option("--kernel", flags.kernel, "exp_similarity or gaussian_l2");
  cmd->add_option("--sharpe-variant", flags.sharpe, "sqrt or paper-literal");
}

void finish_config(CLI::App* cmd, RunConfig& cfg, const Flags& flags) {
  if (!flags.split.empty()) cfg.split = {flags.split[0], flags.split[1], flags.split[2]};
  if (!flags.windows.empty()) cfg.windows = {flags.windows[0], flags.windows[1], flags.windows[2]};
  cfg.kernel = kernel_variant_from_string(flags.kernel);
  cfg.sharpe_variant = sharpe_variant_from_string(flags.sharpe);
  if (cmd->count("--threshold") > 0) cfg.threshold = flags.threshold;
  cfg.validate();
}

}  // namespace

int run_command(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-source Bayesian regression backtester", "lst"};
  app.require_subcommand(1);
  RunConfig cfg;
  Flags flags;

  struct Cmd {
    const char* name;
    const char* help;
  };
  const std::array<Cmd, 8> cmds{{{"gen", "Generate a synthetic series from a latent-source spec"},
                                 {"ingest", "Coarsen raw ticks onto the interval grid"},
                                 {"build-banks", "Build pattern banks from the first period"},
                                 {"fit", "Calibrate c and fit combiner weights on the second period"},
                                 {"backtest", "Backtest the model on the third period"},
                                 {"sweep", "Threshold sweep on the third period"},
                                 {"report", "Backtest, sweep and write the full report bundle"},
                                 {"pipeline", "Run every stage in order"}}};
  for (const auto& c : cmds) add_common(app.add_subcommand(c.name, c.help), cfg, flags);

  std::vector<const char*> argv{"lst"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "lst: " << e.what() << "\n\n" << app.help();
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    kernels::configure_threads_from_env();
    CLI::App* cmd = app.get_subcommands().front();
    finish_config(cmd, cfg, flags);
    const std::string name = cmd->get_name();
    if (name == "pipeline") {
      run_pipeline(cfg);
    } else if (name == "gen") {
      stage_gen(cfg);
    } else if (name == "ingest") {
      stage_ingest(cfg);
    } else if (name == "build-banks") {
      stage_build_banks(cfg, load_series(cfg.resolved_series()));
    } else if (name == "fit") {
      const auto series = load_series(cfg.resolved_series());
      BankSet banks;
      for (std::size_t j = 0; j < 3; ++j) banks[j] = load_bank(out_path(cfg, kBankFiles[j]).string());
      stage_fit(cfg, series, std::move(banks));
    } else {
      const auto series = load_series(cfg.resolved_series());
      const auto model = load_model(cfg.resolved_model());
      if (name == "backtest") {
        const auto rep = stage_backtest(cfg, series, model);
        ensure_out(cfg);
        write_text(out_path(cfg, "summary.json"), summary_json(rep, cfg.sharpe_variant) + '\n');
        std::ofstream t(out_path(cfg, "trades.csv"), std::ios::binary);
        write_trades_csv(t, rep.trades);
        std::ofstream e(out_path(cfg, "equity_curve.csv"), std::ios::binary);
        write_equity_csv(e, rep);
        if (!t || !e) throw std::runtime_error("write failed in " + cfg.out);
      } else if (name == "sweep") {
        const auto rows = stage_sweep(cfg, series, model);
        ensure_out(cfg);
        std::ofstream s(out_path(cfg, "sweep.csv"), std::ios::binary);
        write_sweep_csv(s, rows);
        if (!s) throw std::runtime_error("write failed: " + out_path(cfg, "sweep.csv").string());
      } else {
        stage_report(cfg, series, model);
      }
    }
  } catch (const std::exception& e) {
    err << "lst: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace lst
