#include "lst/pattern_bank.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lst/kernels.hpp"

namespace lst {

bool normalize_into(std::span<const double> x, std::span<double> out) {
  if (out.size() != x.size()) throw std::invalid_argument("normalize: output size mismatch");
  const std::size_t m = x.size();
  if (m == 0) return true;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(m));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    std::fill(out.begin(), out.end(), 0.0);
    return true;
  }
  for (std::size_t z = 0; z < m; ++z) out[z] = (x[z] - mean) / sd;
  return false;
}

NormalizedVector normalize(std::span<const double> x) {
  NormalizedVector out;
  out.values.resize(x.size());
  out.constant = normalize_into(x, out.values);
  return out;
}

namespace {

std::size_t window_count(const PriceSeries& series, std::size_t window, std::size_t stride) {
  if (window < 2) throw std::invalid_argument("extract_windows: window must be >= 2");
  if (stride == 0) throw std::invalid_argument("extract_windows: stride must be >= 1");
  if (series.size() < window + 1)
    throw std::invalid_argument("extract_windows: series of " + std::to_string(series.size()) +
                                " buckets is too short for window " + std::to_string(window));
  // Start indices i with i + window < size.
  return (series.size() - window - 1) / stride + 1;
}

}  // namespace

std::vector<Pattern> extract_windows(const PriceSeries& series, std::size_t window, std::size_t stride) {
  const std::size_t n = window_count(series, window, stride);
  std::vector<Pattern> out(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t w = 0; w < static_cast<std::ptrdiff_t>(n); ++w) {
    const std::size_t i = static_cast<std::size_t>(w) * stride;
    auto& p = out[static_cast<std::size_t>(w)];
    p.x.assign(series.prices.begin() + static_cast<std::ptrdiff_t>(i),
               series.prices.begin() + static_cast<std::ptrdiff_t>(i + window));
    p.y = series.prices[i + window] - series.prices[i + window - 1];
    p.normalized_x.resize(window);
    p.constant = normalize_into(p.x, p.normalized_x);
  }
  return out;
}

WindowMatrix extract_window_matrix(const PriceSeries& series, std::size_t window, std::size_t stride) {
  const std::size_t n = window_count(series, window, stride);
  WindowMatrix out;
  out.dim = window;
  out.rows.resize(n * window);
  out.labels.resize(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t w = 0; w < static_cast<std::ptrdiff_t>(n); ++w) {
    const auto ww = static_cast<std::size_t>(w);
    const std::size_t i = ww * stride;
    normalize_into(std::span<const double>(series.prices.data() + i, window),
                   std::span<double>(out.rows.data() + ww * window, window));
    out.labels[ww] = series.prices[i + window] - series.prices[i + window - 1];
  }
  return out;
}

WindowMatrix to_window_matrix(std::span<const Pattern> patterns) {
  WindowMatrix out;
  if (patterns.empty()) return out;
  out.dim = patterns.front().normalized_x.size();
  out.rows.reserve(patterns.size() * out.dim);
  for (const auto& p : patterns) {
    if (p.normalized_x.size() != out.dim) throw std::invalid_argument("patterns differ in dimension");
    out.rows.insert(out.rows.end(), p.normalized_x.begin(), p.normalized_x.end());
    out.labels.push_back(p.y);
  }
  return out;
}

namespace {

// k-means++: first centre uniform, then proportional to squared distance to the
// nearest chosen centre.
std::vector<double> seed_centroids(const WindowMatrix& data, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = data.size();
  const std::size_t dim = data.dim;
  std::vector<double> centroids;
  centroids.reserve(k * dim);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  auto push = [&](std::size_t i) {
    const auto r = data.row(i);
    centroids.insert(centroids.end(), r.begin(), r.end());
  };
  push(first(rng));

  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    const double* last = centroids.data() + (c - 1) * dim;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double d = kernels::squared_distance(data.rows.data() + ii * dim, last, dim);
      if (d < min_d[ii]) min_d[ii] = d;
    }
    const double total = std::accumulate(min_d.begin(), min_d.end(), 0.0);
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double target = unit(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= min_d[i];
        if (target < 0.0 && min_d[i] > 0.0) {
          pick = i;
          break;
        }
      }
      // Rounding can exhaust the loop; fall back to the last point with mass.
      if (min_d[pick] == 0.0)
        for (std::size_t i = n; i-- > 0;)
          if (min_d[i] > 0.0) {
            pick = i;
            break;
          }
    } else {
      pick = first(rng);  // all remaining points coincide with a centre
    }
    push(pick);
  }
  return centroids;
}

void label_stats(const WindowMatrix& data, ClusterSet& cs) {
  cs.population.assign(cs.k, 0);
  cs.label_mean.assign(cs.k, 0.0);
  cs.label_std.assign(cs.k, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    ++cs.population[cs.assignments[i]];
    cs.label_mean[cs.assignments[i]] += data.labels[i];
  }
  for (std::size_t c = 0; c < cs.k; ++c)
    if (cs.population[c] > 0) cs.label_mean[c] /= static_cast<double>(cs.population[c]);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double d = data.labels[i] - cs.label_mean[cs.assignments[i]];
    cs.label_std[cs.assignments[i]] += d * d;
  }
  for (std::size_t c = 0; c < cs.k; ++c)
    if (cs.population[c] > 0) cs.label_std[c] = std::sqrt(cs.label_std[c] / static_cast<double>(cs.population[c]));
}

}  // namespace

ClusterSet kmeans(const WindowMatrix& data, std::size_t k, std::uint64_t seed, std::size_t max_iters) {
  const std::size_t n = data.size();
  if (k == 0) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k)
    throw std::invalid_argument("kmeans: " + std::to_string(n) + " patterns cannot fill " + std::to_string(k) +
                                " clusters");
  if (max_iters == 0) throw std::invalid_argument("kmeans: max_iters must be >= 1");
  const std::size_t dim = data.dim;

  std::mt19937_64 rng(seed);
  ClusterSet cs;
  cs.k = k;
  cs.dim = dim;
  cs.centroids = seed_centroids(data, k, rng);
  cs.assignments.assign(n, k);  // sentinel: nothing assigned yet

  std::vector<std::size_t> next(n);
  std::vector<double> dist(n);
  bool converged = false;
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    kernels::assign_nearest_parallel(data.rows, cs.centroids, dim, next, dist);
    cs.objective_history.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
    if (next == cs.assignments) {
      converged = true;
      break;
    }
    cs.assignments.swap(next);

    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = cs.assignments[i];
      ++counts[c];
      const auto r = data.row(i);
      double* dst = sums.data() + c * dim;
      for (std::size_t z = 0; z < dim; ++z) dst[z] += r[z];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centre
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (std::size_t z = 0; z < dim; ++z) cs.centroids[c * dim + z] = sums[c * dim + z] * inv;
    }
  }
  if (!converged) {
    // Final pass so every pattern sits with its nearest (updated) centroid.
    kernels::assign_nearest_parallel(data.rows, cs.centroids, dim, next, dist);
    cs.objective_history.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
    cs.assignments.swap(next);
  }
  label_stats(data, cs);
  return cs;
}

ClusterSet kmeans(std::span<const Pattern> patterns, std::size_t k, std::uint64_t seed, std::size_t max_iters) {
  return kmeans(to_window_matrix(patterns), k, seed, max_iters);
}

double effectiveness(const ClusterSet& clusters, std::size_t c) {
  if (clusters.population[c] == 0) return 0.0;
  return std::abs(clusters.label_mean[c]) / (clusters.label_std[c] + kEffectivenessEps);
}

std::vector<Representative> select_effective(const ClusterSet& clusters, std::size_t m) {
  if (m > clusters.k)
    throw std::invalid_argument("select_effective: m = " + std::to_string(m) + " exceeds k = " +
                                std::to_string(clusters.k));
  std::vector<std::size_t> order(clusters.k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> score(clusters.k);
  for (std::size_t c = 0; c < clusters.k; ++c) score[c] = effectiveness(clusters, c);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    if (clusters.population[a] != clusters.population[b]) return clusters.population[a] > clusters.population[b];
    return a < b;
  });

  std::vector<Representative> out;
  out.reserve(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t c = order[r];
    Representative rep;
    rep.vector = normalize(clusters.centroid(c)).values;
    rep.label = clusters.label_mean[c];
    rep.population = clusters.population[c];
    rep.cluster = c;
    rep.score = score[c];
    out.push_back(std::move(rep));
  }
  return out;
}

void PatternBank::add(std::span<const double> v, double label, std::size_t population) {
  if (window_length == 0) window_length = v.size();
  if (v.size() != window_length) throw std::invalid_argument("PatternBank::add: dimension mismatch");
  vectors.insert(vectors.end(), v.begin(), v.end());
  labels.push_back(label);
  populations.push_back(population);
}

void PatternBank::validate() const {
  if (window_length == 0) throw std::invalid_argument("pattern bank: window_length must be positive");
  if (labels.empty()) throw std::invalid_argument("pattern bank: empty bank");
  if (vectors.size() != labels.size() * window_length || populations.size() != labels.size())
    throw std::invalid_argument("pattern bank: inconsistent storage");
  if (!(kernel_c > 0.0)) throw std::invalid_argument("pattern bank: kernel_c must be positive");
}

BankSet build_banks(const PriceSeries& series, const BankConfig& config) {
  const std::size_t longest = *std::max_element(config.windows.begin(), config.windows.end());
  if (series.size() < longest + 1)
    throw std::invalid_argument("build_banks: series has " + std::to_string(series.size()) + " buckets, needs " +
                                std::to_string(longest + 1));
  if (config.k == 0 || config.m == 0) throw std::invalid_argument("build_banks: k and m must be >= 1");

  BankSet banks;
  for (std::size_t j = 0; j < banks.size(); ++j) {
    const WindowMatrix windows = extract_window_matrix(series, config.windows[j], config.stride);
    const std::size_t k = std::max<std::size_t>(1, std::min(config.k, windows.size() / 2));
    const std::size_t m = std::min(config.m, k);
    const ClusterSet clusters = kmeans(windows, k, config.seed + j, config.max_iters);
    PatternBank& bank = banks[j];
    bank.window_length = config.windows[j];
    for (const auto& rep : select_effective(clusters, m)) bank.add(rep.vector, rep.label, rep.population);
  }
  return banks;
}

// ---- serialization -------------------------------------------------------

std::string bank_to_json(const PatternBank& bank) {
  nlohmann::json j;
  j["window_length"] = bank.window_length;
  j["kernel_c"] = bank.kernel_c;
  auto& pats = j["patterns"] = nlohmann::json::array();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto p = bank.pattern(i);
    pats.push_back({{"vector", std::vector<double>(p.begin(), p.end())},
                    {"label", bank.labels[i]},
                    {"population", bank.populations[i]}});
  }
  return j.dump();
}

PatternBank bank_from_json(const std::string& text) {
  PatternBank bank;
  try {
    const auto j = nlohmann::json::parse(text);
    bank.window_length = j.at("window_length").get<std::size_t>();
    bank.kernel_c = j.at("kernel_c").get<double>();
    for (const auto& p : j.at("patterns"))
      bank.add(p.at("vector").get<std::vector<double>>(), p.at("label").get<double>(),
               p.value("population", std::size_t{1}));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("pattern bank json: ") + e.what());
  }
  bank.validate();
  return bank;
}

namespace {

constexpr char kBankMagic[4] = {'L', 'S', 'T', 'B'};
constexpr std::uint32_t kBankVersion = 1;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("pattern bank binary: truncated");
  return to_little(v);
}

}  // namespace

void write_bank_binary(std::ostream& out, const PatternBank& bank) {
  bank.validate();
  out.write(kBankMagic, 4);
  put<std::uint32_t>(out, kBankVersion);
  put<std::uint64_t>(out, bank.window_length);
  put<double>(out, bank.kernel_c);
  put<std::uint64_t>(out, bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    put<double>(out, bank.labels[i]);
    put<std::uint64_t>(out, bank.populations[i]);
    for (double v : bank.pattern(i)) put<double>(out, v);
  }
}

PatternBank read_bank_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kBankMagic, 4) != 0)
    throw std::runtime_error("pattern bank binary: bad magic");
  if (get<std::uint32_t>(in) != kBankVersion) throw std::runtime_error("pattern bank binary: unsupported version");
  PatternBank bank;
  bank.window_length = get<std::uint64_t>(in);
  bank.kernel_c = get<double>(in);
  const auto count = get<std::uint64_t>(in);
  std::vector<double> v(bank.window_length);
  for (std::uint64_t i = 0; i < count; ++i) {
    const double label = get<double>(in);
    const auto pop = get<std::uint64_t>(in);
    for (auto& x : v) x = get<double>(in);
    bank.add(v, label, pop);
  }
  bank.validate();
  return bank;
}

void save_bank(const std::string& path, const PatternBank& bank) {
  const bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (binary)
    write_bank_binary(out, bank);
  else
    out << bank_to_json(bank) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

PatternBank load_bank(const std::string& path) {
  const bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (binary) return read_bank_binary(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return bank_from_json(ss.str());
}

}  // namespace lst
