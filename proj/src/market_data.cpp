#include "lst/market_data.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "lst/format.hpp"

namespace lst {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

bool blank(std::string_view s) {
  for (char c : s)
    if (c != ' ' && c != '\t' && c != '\r') return false;
  return true;
}

[[noreturn]] void fail_at(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("tick csv line " + std::to_string(line_no) + ": " + what);
}

double field(std::string_view s, std::size_t line_no, const char* name) {
  double v = 0.0;
  if (!parse_double(s, v) || !std::isfinite(v)) fail_at(line_no, std::string("bad ") + name + " '" + std::string(s) + "'");
  return v;
}

std::vector<BookLevel> parse_levels(std::span<const std::string_view> cols, std::size_t line_no, const char* side) {
  std::vector<BookLevel> levels;
  for (std::size_t i = 0; i + 1 < cols.size(); i += 2) {
    if (blank(cols[i]) && blank(cols[i + 1])) continue;  // shallower book
    BookLevel lvl{field(cols[i], line_no, side), field(cols[i + 1], line_no, side)};
    if (lvl.volume < 0.0) fail_at(line_no, std::string("negative ") + side + " volume");
    levels.push_back(lvl);
  }
  return levels;
}

double sum_volumes(const std::vector<BookLevel>& levels, std::size_t depth) {
  double total = 0.0;
  for (std::size_t i = 0; i < levels.size() && i < depth; ++i) total += levels[i].volume;
  return total;
}

}  // namespace

PriceSeries PriceSeries::slice(std::size_t first, std::size_t count) const {
  if (first + count > prices.size()) throw std::out_of_range("PriceSeries::slice out of range");
  PriceSeries out;
  out.start_time = bucket_time(first);
  out.interval = interval;
  out.prices.assign(prices.begin() + static_cast<std::ptrdiff_t>(first),
                    prices.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.imbalances.assign(imbalances.begin() + static_cast<std::ptrdiff_t>(first),
                        imbalances.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

double imbalance(const BookSnapshot& book, std::size_t depth) {
  const bool levels = !book.bids.empty() || !book.asks.empty();
  const double bid = levels ? sum_volumes(book.bids, depth) : book.bid_total;
  const double ask = levels ? sum_volumes(book.asks, depth) : book.ask_total;
  const double total = bid + ask;
  if (total <= 0.0) return 0.0;
  return (bid - ask) / total;
}

std::vector<TickRecord> parse_ticks(std::istream& in) {
  std::vector<TickRecord> ticks;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    if (!have_header) {
      auto cols = split_csv(line);
      if (cols.size() < 4 || cols[0].find("timestamp") == std::string_view::npos)
        fail_at(line_no, "missing header 'timestamp,price,bid_vol_total,ask_vol_total'");
      have_header = true;
      continue;
    }
    auto cols = split_csv(line);
    if (cols.size() < 4) fail_at(line_no, "expected at least 4 columns, got " + std::to_string(cols.size()));
    const std::size_t extra = cols.size() - 4;
    if (extra % 4 != 0 || extra / 4 > kBookDepth)
      fail_at(line_no, "extended form needs up to 60 (price,volume) pairs per side");

    TickRecord t;
    t.timestamp = field(cols[0], line_no, "timestamp");
    t.price = field(cols[1], line_no, "price");
    if (t.price <= 0.0) fail_at(line_no, "price must be positive");
    t.book.bid_total = field(cols[2], line_no, "bid_vol_total");
    t.book.ask_total = field(cols[3], line_no, "ask_vol_total");
    if (t.book.bid_total < 0.0 || t.book.ask_total < 0.0) fail_at(line_no, "negative volume total");

    if (extra > 0) {
      std::span<const std::string_view> rest(cols.data() + 4, extra);
      const std::size_t half = extra / 2;
      t.book.bids = parse_levels(rest.first(half), line_no, "bid");
      t.book.asks = parse_levels(rest.subspan(half), line_no, "ask");
      for (std::size_t i = 1; i < t.book.bids.size(); ++i)
        if (!(t.book.bids[i].price < t.book.bids[i - 1].price)) fail_at(line_no, "bid prices must be strictly descending");
      for (std::size_t i = 1; i < t.book.asks.size(); ++i)
        if (!(t.book.asks[i].price > t.book.asks[i - 1].price)) fail_at(line_no, "ask prices must be strictly ascending");
    }
    if (!ticks.empty() && t.timestamp < ticks.back().timestamp) fail_at(line_no, "timestamp decreases");
    ticks.push_back(std::move(t));
  }
  return ticks;
}

PriceSeries coarsen(std::span<const TickRecord> ticks, double interval) {
  if (ticks.empty()) throw std::invalid_argument("coarsen: no ticks");
  if (!(interval > 0.0)) throw std::invalid_argument("coarsen: interval must be positive");

  auto bucket_of = [interval](double t) { return static_cast<long long>(std::ceil(t / interval)); };
  const long long first = bucket_of(ticks.front().timestamp);
  const long long last = bucket_of(ticks.back().timestamp);
  if (last < first) throw std::invalid_argument("coarsen: timestamps must be non-decreasing");

  const auto n = static_cast<std::size_t>(last - first + 1);
  PriceSeries out;
  out.start_time = static_cast<double>(first) * interval;
  out.interval = interval;
  out.prices.assign(n, 0.0);
  out.imbalances.assign(n, 0.0);
  std::vector<char> filled(n, 0);

  long long prev = first;
  for (const auto& t : ticks) {
    const long long b = bucket_of(t.timestamp);
    if (b < prev) throw std::invalid_argument("coarsen: timestamps must be non-decreasing");
    prev = b;
    const auto i = static_cast<std::size_t>(b - first);
    out.prices[i] = t.price;
    out.imbalances[i] = imbalance(t.book);
    filled[i] = 1;
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!filled[i]) {
      out.prices[i] = out.prices[i - 1];
      out.imbalances[i] = out.imbalances[i - 1];
    }
  }
  return out;
}

void write_series_csv(std::ostream& out, const PriceSeries& series) {
  out << "bucket_time,price,imbalance\n";
  for (std::size_t i = 0; i < series.size(); ++i)
    out << fmt_double(series.bucket_time(i)) << ',' << fmt_double(series.prices[i]) << ','
        << fmt_double(series.imbalances[i]) << '\n';
}

PriceSeries read_series_csv(std::istream& in) {
  PriceSeries s;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> times;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    if (line_no == 1) {
      if (line.rfind("bucket_time", 0) != 0) throw std::runtime_error("series csv: missing header");
      continue;
    }
    auto cols = split_csv(line);
    double t = 0, p = 0, r = 0;
    if (cols.size() != 3 || !parse_double(cols[0], t) || !parse_double(cols[1], p) || !parse_double(cols[2], r))
      throw std::runtime_error("series csv line " + std::to_string(line_no) + ": malformed row");
    times.push_back(t);
    s.prices.push_back(p);
    s.imbalances.push_back(r);
  }
  if (times.empty()) throw std::runtime_error("series csv: no rows");
  s.start_time = times.front();
  s.interval = times.size() > 1 ? times[1] - times[0] : kDefaultInterval;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double expect = s.bucket_time(i);
    if (std::abs(times[i] - expect) > 1e-6 * std::max(1.0, std::abs(expect)))
      throw std::runtime_error("series csv: gap or irregular spacing at row " + std::to_string(i + 2));
  }
  return s;
}

PriceSeries load_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_series_csv(in);
}

void save_series(const std::string& path, const PriceSeries& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_series_csv(out, series);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace lst
