#include <algorithm>

#include "metroflow/error.hpp"
#include "metroflow/experiments/experiments.hpp"

namespace metroflow::experiments {
namespace {

model::ModelConfig one_layer(model::Variant variant, const DiagnosticSpec& spec, std::uint64_t seed) {
  model::ModelConfig c;
  c.variant = variant;
  c.k = spec.k;
  c.num_layers = 1;
  c.head_layers = 1;
  c.hidden_width = spec.hidden_width;
  c.seed = seed;
  if (variant == model::Variant::sage_baseline) {
    c.aggregator = nn::Aggregator::mean;
    c.closed_neighborhoods = true;
  }
  return c;
}

OverlapStat overlap_stats(const BaseGraph& graph, int k) {
  const KHopGraph khop = build_khop(graph, k);
  OverlapStat stat{k, 0.0, 0.0};
  const std::size_t n = khop.n;
  std::size_t pairs = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (khop.degree(u) + 1 == n) stat.full_fraction += 1.0;
    for (std::size_t v = u + 1; v < n; ++v) {
      stat.mean_overlap += neighborhood_overlap(khop, u, v);
      ++pairs;
    }
  }
  if (pairs > 0) stat.mean_overlap /= static_cast<double>(pairs);
  if (n > 0) stat.full_fraction /= static_cast<double>(n);
  return stat;
}

}  // namespace

std::vector<std::size_t> select_zones(const StationDataset& dataset, const std::vector<int>& zones) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < dataset.num_stations(); ++s) {
    if (std::find(zones.begin(), zones.end(), dataset.social()[s].zone) != zones.end()) {
      out.push_back(s);
    }
  }
  return out;
}

std::vector<std::size_t> select_ball(const StationDataset& dataset, std::size_t center, int radius) {
  if (center >= dataset.num_stations()) fail(ErrorCategory::reference, "ball center out of range");
  const auto dist = bfs_distances(dataset.base_graph(), center);
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < dist.size(); ++s) {
    if (dist[s] >= 0 && dist[s] <= radius) out.push_back(s);
  }
  return out;
}

OversmoothingReport oversmoothing_diagnostic(const StationDataset& dataset,
                                             const std::vector<std::size_t>& stations,
                                             const DiagnosticSpec& spec) {
  if (stations.size() < 2) {
    fail(ErrorCategory::diagnostic, "diagnostic needs at least two selected stations");
  }
  if (spec.k < 1) fail(ErrorCategory::diagnostic, "diagnostic hop count must be at least 1");
  const StationDataset region = dataset.subset(stations);
  if (!is_connected(region.base_graph())) {
    fail(ErrorCategory::diagnostic, "selected stations do not form a connected region");
  }

  OversmoothingReport report;
  report.stations = region.stations();
  report.task = spec.task;
  report.k = spec.k;
  const KHopGraph khop = build_khop(region.base_graph(), spec.k);
  for (std::size_t v = 0; v < khop.n; ++v) {
    if (khop.degree(v) + 1 == khop.n) report.fully_connected.push_back(v);
  }
  for (int k = 1; k <= spec.k; ++k) report.overlap.push_back(overlap_stats(region.base_graph(), k));

  for (std::uint64_t seed : spec.seeds) {
    const auto split = train::split_years(region.years(), seed);
    DiagnosticRun run;
    run.seed = seed;
    run.year = split.test_years.front();
    const TaskMatrix truth = build_task(region, run.year, spec.task);
    run.truth.assign(truth.target.values().begin(), truth.target.values().end());

    model::RunConfig config;
    config.task = spec.task;
    config.epochs = spec.epochs;

    config.model = one_layer(model::Variant::gcn_baseline, spec, seed);
    model::Model gcn = model::assemble(config.model, region);
    run.gcn_test_mape = train::train(gcn, region, config, split).test_mape;
    run.gcn_predictions = model::predict_task(gcn, region, run.year, spec.task);

    config.model = one_layer(model::Variant::sage_baseline, spec, seed);
    model::Model sage = model::assemble(config.model, region);
    run.sage_test_mape = train::train(sage, region, config, split).test_mape;
    run.sage_predictions = model::predict_task(sage, region, run.year, spec.task);
    {
      Tape tape(false);
      const auto parts = sage.first_layer_parts(
          tape, tape.constant(sage.feature_scaler().apply(truth.features)));
      run.self_part = parts.self_part.value();
      run.neighbor_part = parts.neighbor_part.value();
    }
    report.runs.push_back(std::move(run));
  }
  return report;
}

}  // namespace metroflow::experiments
