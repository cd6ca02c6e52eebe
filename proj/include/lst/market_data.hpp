#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lst {

/// Maximum order-book depth carried per side.
inline constexpr std::size_t kBookDepth = 60;

/// Default coarsening interval in seconds.
inline constexpr double kDefaultInterval = 10.0;

struct BookLevel {
  double price = 0.0;
  double volume = 0.0;
};

/// Top-of-book view. When `bids`/`asks` are empty the aggregate totals are
/// used instead (the compact CSV form only carries totals).
struct BookSnapshot {
  std::vector<BookLevel> bids;  // best first, strictly descending price
  std::vector<BookLevel> asks;  // best first, strictly ascending price
  double bid_total = 0.0;
  double ask_total = 0.0;
};

struct TickRecord {
  double timestamp = 0.0;  // exchange-local epoch seconds
  double price = 0.0;
  BookSnapshot book;
};

/// Uniform grid of coarsened prices. Bucket i sits at start_time + i * interval.
struct PriceSeries {
  double start_time = 0.0;
  double interval = kDefaultInterval;
  std::vector<double> prices;
  std::vector<double> imbalances;

  std::size_t size() const { return prices.size(); }
  double bucket_time(std::size_t i) const { return start_time + static_cast<double>(i) * interval; }

  /// Buckets [first, first + count) as an independent series.
  PriceSeries slice(std::size_t first, std::size_t count) const;
};

/// Order-book imbalance (v_bid - v_ask) / (v_bid + v_ask) over the top
/// `depth` levels per side. Zero total volume yields 0.
double imbalance(const BookSnapshot& book, std::size_t depth = kBookDepth);

/// Parses the tick CSV format. Throws std::runtime_error naming the line on
/// malformed rows or decreasing timestamps.
std::vector<TickRecord> parse_ticks(std::istream& in);

/// Maps every tick to bucket ceil(t / interval) * interval; the last tick in a
/// bucket wins and empty buckets carry the previous bucket forward.
PriceSeries coarsen(std::span<const TickRecord> ticks, double interval = kDefaultInterval);

void write_series_csv(std::ostream& out, const PriceSeries& series);
PriceSeries read_series_csv(std::istream& in);

PriceSeries load_series(const std::string& path);
void save_series(const std::string& path, const PriceSeries& series);

}  // namespace lst
