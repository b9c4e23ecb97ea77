#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "metroflow/data/dataset.hpp"
#include "metroflow/error.hpp"

namespace metroflow {
namespace {

// Relative flow per (zone, column). Inner zones attract the morning peak,
// outer zones generate it; evenings mirror mornings.
constexpr double kProfile[4][kNumColumns] = {
    // early        am          mid         pm          late
    {0.30, 0.45, 0.80, 1.90, 0.95, 1.00, 1.85, 0.85, 0.55, 0.35},
    {0.35, 0.40, 1.10, 1.40, 0.90, 0.90, 1.35, 1.05, 0.50, 0.40},
    {0.45, 0.30, 1.60, 0.90, 0.85, 0.80, 0.95, 1.45, 0.40, 0.50},
    {0.55, 0.25, 1.95, 0.70, 0.80, 0.75, 0.75, 1.80, 0.35, 0.60},
};

std::vector<int> synthetic_years(std::size_t n) {
  // Consecutive years from 2003, skipping 2013.
  std::vector<int> years;
  for (int y = 2003; years.size() < n; ++y) {
    if (y != 2013) years.push_back(y);
  }
  return years;
}

std::string station_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%03zu", i + 1);
  return buf;
}

struct Layout {
  std::vector<Line> lines;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
};

Layout build_lines(const SynthParams& p, std::mt19937_64& rng) {
  const std::size_t per_line = p.n_stations / p.n_lines;
  const std::size_t first = per_line + p.n_stations % p.n_lines;
  if (first < 2 || per_line < 1) {
    fail(ErrorCategory::construction, "cannot lay out " + std::to_string(p.n_lines) + " lines over " +
                                          std::to_string(p.n_stations) + " stations");
  }
  Layout layout;
  std::size_t next = 0;
  for (std::size_t l = 0; l < p.n_lines; ++l) {
    Line line{"L" + std::to_string(l + 1), {}};
    std::size_t fresh = l == 0 ? first : per_line;
    if (l > 0) {
      // Branch off an existing station so the network stays connected.
      std::uniform_int_distribution<std::size_t> pick(0, next - 1);
      line.stations.push_back(pick(rng));
    }
    for (std::size_t i = 0; i < fresh; ++i) line.stations.push_back(next++);
    if (l > 0 && next > fresh + 2 && std::bernoulli_distribution(0.5)(rng)) {
      // Optionally close a loop at another existing station.
      std::uniform_int_distribution<std::size_t> pick(0, next - fresh - 1);
      const std::size_t end = pick(rng);
      if (end != line.stations.front()) line.stations.push_back(end);
    }
    for (std::size_t i = 0; i + 1 < line.stations.size(); ++i) {
      layout.edges.emplace_back(line.stations[i], line.stations[i + 1]);
    }
    layout.lines.push_back(std::move(line));
  }
  return layout;
}

std::vector<int> assign_zones(const BaseGraph& graph) {
  const std::size_t n = graph.size();
  std::size_t center = 0;
  int best = -1;
  std::vector<std::vector<int>> dist(n);
  for (std::size_t v = 0; v < n; ++v) {
    dist[v] = bfs_distances(graph, v);
    const int ecc = *std::max_element(dist[v].begin(), dist[v].end());
    if (best < 0 || ecc < best) {
      best = ecc;
      center = v;
    }
  }
  std::vector<int> zones(n);
  for (std::size_t v = 0; v < n; ++v) {
    zones[v] = std::clamp(dist[center][v] * 4 / (best + 1) + 1, 1, 4);
  }
  return zones;
}

double own_flow(const StationDataset& d, std::size_t s, std::size_t y, int coupled,
                Direction direction) {
  double total = 0.0;
  for (int t = 1; t <= kNumTimestamps; ++t) {
    if (t != coupled) total += d.flow(s, y, column_index(t, direction));
  }
  return total / (kNumTimestamps - 1);
}

void validate(const SynthParams& p) {
  if (p.n_stations < 4) fail(ErrorCategory::contract, "synthetic dataset needs at least 4 stations");
  if (p.n_lines < 1) fail(ErrorCategory::contract, "synthetic dataset needs at least one line");
  if (p.n_years < 1) fail(ErrorCategory::contract, "synthetic dataset needs at least one year");
  if (p.coupled_timestamp < 1 || p.coupled_timestamp > kNumTimestamps) {
    fail(ErrorCategory::contract, "coupled timestamp must be 1..5");
  }
  if (p.coupling_hops < 1) fail(ErrorCategory::contract, "coupling hops must be at least 1");
  if (p.noise < 0.0) fail(ErrorCategory::contract, "noise must be nonnegative");
}

}  // namespace

CouplingTerms coupling_terms(const StationDataset& dataset, const SynthParams& params,
                             std::size_t year_index, Direction direction) {
  const std::size_t n = dataset.num_stations();
  const auto scaler = SocialScaler::fit(dataset.social());
  CouplingTerms terms{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t s = 0; s < n; ++s) {
    terms.own[s] = own_flow(dataset, s, year_index, params.coupled_timestamp, direction);
  }
  for (std::size_t v = 0; v < n; ++v) {
    const auto dist = bfs_distances(dataset.base_graph(), v);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      if (dist[u] < 1 || dist[u] > params.coupling_hops) continue;
      const auto diff = scaler.diff(dataset.social()[u], dataset.social()[v]);
      const double w = std::exp(-params.kernel_sharpness * (diff[0] + diff[1] + diff[2]));
      num += w * terms.own[u];
      den += w;
    }
    terms.neighbor_mean[v] = den > 0.0 ? num / den : terms.own[v];
  }
  return terms;
}

StationDataset synthesize_dataset(const SynthParams& params) {
  validate(params);
  std::mt19937_64 rng(params.seed);
  const std::size_t n = params.n_stations;
  const auto years = synthetic_years(params.n_years);

  Layout layout = build_lines(params, rng);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(station_name(i));
  BaseGraph graph(ids, layout.edges);
  const auto zones = assign_zones(graph);

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<SocialFeatures> social(n);
  for (std::size_t v = 0; v < n; ++v) {
    social[v].zone = zones[v];
    const double log_price = std::log(650.0) - 0.28 * (zones[v] - 1) + 0.25 * normal(rng);
    social[v].housing_price = std::exp(log_price);
    social[v].life_expectancy = 80.0 + 4.0 * (log_price - std::log(500.0)) + 0.8 * normal(rng);
  }

  std::vector<double> size(n);
  for (double& s : size) s = 1000.0 * std::exp(0.5 * normal(rng));
  std::vector<double> growth(years.size());
  for (std::size_t y = 0; y < years.size(); ++y) {
    growth[y] = std::pow(1.025, static_cast<double>(y)) * std::exp(0.04 * normal(rng));
  }

  std::vector<double> traffic(n * years.size() * kNumColumns, 0.0);
  auto at = [&](std::size_t s, std::size_t y, int c) -> double& {
    return traffic[(s * years.size() + y) * kNumColumns + c];
  };
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t y = 0; y < years.size(); ++y) {
      for (int c = 0; c < kNumColumns; ++c) {
        at(s, y, c) = size[s] * kProfile[zones[s] - 1][c] * growth[y] * std::exp(0.1 * normal(rng));
      }
    }
  }

  StationDataset draft(ids, years, traffic, social, layout.lines, graph);
  for (std::size_t y = 0; y < years.size(); ++y) {
    for (Direction d : {Direction::entry, Direction::exit}) {
      const auto terms = coupling_terms(draft, params, y, d);
      for (std::size_t s = 0; s < n; ++s) {
        const double clean = params.alpha * terms.neighbor_mean[s] + params.beta * terms.own[s];
        at(s, y, column_index(params.coupled_timestamp, d)) =
            std::max(0.0, clean * (1.0 + params.noise * normal(rng)));
      }
    }
  }
  return StationDataset(std::move(ids), years, std::move(traffic), std::move(social),
                        std::move(layout.lines), std::move(graph));
}

}  // namespace metroflow
