#include "lst/latent_source.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace lst {

using nlohmann::json;

void LatentSourceSpec::validate() const {
  if (sources.empty()) throw std::invalid_argument("latent spec: no sources");
  const std::size_t d = sources.front().size();
  if (d == 0) throw std::invalid_argument("latent spec: zero-dimensional sources");
  for (const auto& s : sources)
    if (s.size() != d) throw std::invalid_argument("latent spec: sources differ in dimension");
  if (mix.size() != sources.size()) throw std::invalid_argument("latent spec: mix size != number of sources");
  double total = 0.0;
  for (double m : mix) {
    if (!(m >= 0.0)) throw std::invalid_argument("latent spec: negative mixture weight");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("latent spec: mixture weights must sum to 1");
  if (label_dists.size() != sources.size())
    throw std::invalid_argument("latent spec: label_dists size != number of sources");
  for (const auto& ld : label_dists)
    if (const auto* g = std::get_if<GaussianLabel>(&ld); g && !(g->variance >= 0.0))
      throw std::invalid_argument("latent spec: negative label variance");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("latent spec: noise_sigma must be >= 0");
  if (!(interval > 0.0)) throw std::invalid_argument("latent spec: interval must be positive");
}

namespace {

double draw_label(const LabelDist& dist, std::mt19937_64& rng) {
  if (const auto* p = std::get_if<PointMass>(&dist)) return p->value;
  const auto& g = std::get<GaussianLabel>(dist);
  if (g.variance == 0.0) return g.mean;
  std::normal_distribution<double> nd(g.mean, std::sqrt(g.variance));
  return nd(rng);
}

}  // namespace

std::vector<LabeledPoint> generate_labeled(const LatentSourceSpec& spec, std::size_t n) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("generate_labeled: n must be >= 1");
  std::mt19937_64 rng(spec.seed);
  std::discrete_distribution<std::size_t> pick(spec.mix.begin(), spec.mix.end());
  std::normal_distribution<double> eps(0.0, 1.0);

  std::vector<LabeledPoint> out(n);
  for (auto& pt : out) {
    pt.source = pick(rng);
    const auto& s = spec.sources[pt.source];
    pt.x.resize(s.size());
    for (std::size_t z = 0; z < s.size(); ++z) pt.x[z] = s[z] + spec.noise_sigma * eps(rng);
    pt.y = draw_label(spec.label_dists[pt.source], rng);
  }
  return out;
}

SyntheticSeries generate_price_series(const LatentSourceSpec& spec, double duration, std::uint64_t seed) {
  spec.validate();
  const std::size_t length = spec.dim();
  const auto n = static_cast<std::size_t>(std::floor(duration / spec.interval));
  if (n < length + 1)
    throw std::invalid_argument("generate_price_series: duration shorter than the source pattern");

  std::mt19937_64 rng(seed);
  std::mt19937_64 book_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::discrete_distribution<std::size_t> pick(spec.mix.begin(), spec.mix.end());
  std::normal_distribution<double> eps(0.0, 1.0);
  std::uniform_real_distribution<double> book_noise(-0.5, 0.5);

  std::vector<double> increments(n, 0.0);
  SyntheticSeries out;
  std::size_t pos = 1;
  while (pos + length <= n) {
    const std::size_t k = pick(rng);
    for (std::size_t z = 0; z < length; ++z) increments[pos + z] = spec.sources[k][z] + spec.noise_sigma * eps(rng);
    out.embeddings.push_back({pos, length, k});
    pos += length;
  }
  for (; pos < n; ++pos) increments[pos] = spec.noise_sigma * eps(rng);

  auto& s = out.series;
  s.start_time = 0.0;
  s.interval = spec.interval;
  s.prices.resize(n);
  s.imbalances.resize(n);
  s.prices[0] = spec.start_price;
  for (std::size_t i = 1; i < n; ++i) s.prices[i] = s.prices[i - 1] + increments[i];
  for (auto& r : s.imbalances) r = book_noise(book_rng);
  return out;
}

std::string latent_spec_to_json(const LatentSourceSpec& spec) {
  json j;
  j["sources"] = spec.sources;
  j["mix"] = spec.mix;
  json dists = json::array();
  for (const auto& ld : spec.label_dists) {
    if (const auto* p = std::get_if<PointMass>(&ld))
      dists.push_back({{"type", "point"}, {"value", p->value}});
    else {
      const auto& g = std::get<GaussianLabel>(ld);
      dists.push_back({{"type", "gaussian"}, {"mean", g.mean}, {"variance", g.variance}});
    }
  }
  j["label_dists"] = dists;
  j["noise_sigma"] = spec.noise_sigma;
  j["seed"] = spec.seed;
  j["start_price"] = spec.start_price;
  j["interval"] = spec.interval;
  return j.dump(2);
}

LatentSourceSpec latent_spec_from_json(const std::string& text) {
  LatentSourceSpec spec;
  try {
    const json j = json::parse(text);
    spec.sources = j.at("sources").get<std::vector<std::vector<double>>>();
    spec.mix = j.at("mix").get<std::vector<double>>();
    if (j.contains("label_dists")) {
      for (const auto& d : j.at("label_dists")) {
        const auto type = d.at("type").get<std::string>();
        if (type == "point")
          spec.label_dists.emplace_back(PointMass{d.at("value").get<double>()});
        else if (type == "gaussian")
          spec.label_dists.emplace_back(GaussianLabel{d.at("mean").get<double>(), d.at("variance").get<double>()});
        else
          throw std::invalid_argument("latent spec: unknown label distribution '" + type + "'");
      }
    } else {
      spec.label_dists.assign(spec.sources.size(), PointMass{0.0});
    }
    spec.noise_sigma = j.value("noise_sigma", 1.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.start_price = j.value("start_price", 1000.0);
    spec.interval = j.value("interval", kDefaultInterval);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("latent spec json: ") + e.what());
  }
  spec.validate();
  return spec;
}

LatentSourceSpec load_latent_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return latent_spec_from_json(ss.str());
}

void save_latent_spec(const std::string& path, const LatentSourceSpec& spec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << latent_spec_to_json(spec) << '\n';
}

}  // namespace lst
