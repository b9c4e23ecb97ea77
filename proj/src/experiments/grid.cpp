#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "metroflow/error.hpp"
#include "metroflow/experiments/experiments.hpp"
#include "metroflow/util/csv.hpp"

namespace metroflow::experiments {

std::string VariantSpec::label() const {
  std::string out(model::to_string(variant));
  if (sampling_rate) out += "_" + csv::format_double(*sampling_rate);
  return out;
}

VariantSpec VariantSpec::parse(std::string_view label) {
  VariantSpec spec;
  const auto sep = label.find('_');
  // kh_0.9 and kth_0.9 carry a rate; other names contain underscores of their own.
  if (sep != std::string_view::npos && (label.substr(0, sep) == "kh" || label.substr(0, sep) == "kth")) {
    spec.variant = model::parse_variant(label.substr(0, sep));
    try {
      spec.sampling_rate = csv::parse_double(label.substr(sep + 1), "sampling rate");
    } catch (const Error& e) {
      fail(ErrorCategory::config, e.what());
    }
  } else {
    spec.variant = model::parse_variant(label);
  }
  return spec;
}

GridSpec GridSpec::reduced_default() {
  using model::Variant;
  GridSpec g;
  g.variants = {{Variant::main_body, {}}, {Variant::kt, {}},           {Variant::kh, 0.9},
                {Variant::kth, 0.9},      {Variant::sage_baseline, {}}, {Variant::gcn_baseline, {}}};
  g.hops = {1, 2, 3, 4, 5, 6};
  g.tasks = {Task{3, Direction::entry}, Task{3, Direction::exit}};
  g.seeds = {1, 2, 3};
  return g;
}

GridSpec GridSpec::full() {
  using model::Variant;
  GridSpec g;
  g.variants = {{Variant::main_body, {}}, {Variant::kt, {}}};
  for (Variant v : {Variant::kh, Variant::kth}) {
    for (double r : {0.6, 0.7, 0.8, 0.9}) g.variants.push_back({v, r});
  }
  g.variants.push_back({Variant::sage_baseline, {}});
  g.variants.push_back({Variant::gcn_baseline, {}});
  g.variants.push_back({Variant::gcn_learned_weights, {}});
  for (int k = 1; k <= 10; ++k) g.hops.push_back(k);
  g.tasks = Task::all();
  g.seeds = {1};
  return g;
}

std::size_t GridSpec::num_cells() const {
  return variants.size() * hops.size() * tasks.size() * seeds.size();
}

model::RunConfig GridSpec::cell(std::size_t i) const {
  if (i >= num_cells()) fail(ErrorCategory::contract, "grid cell index out of range");
  const std::size_t s = i % seeds.size();
  i /= seeds.size();
  const std::size_t t = i % tasks.size();
  i /= tasks.size();
  const std::size_t h = i % hops.size();
  const std::size_t v = i / hops.size();
  model::RunConfig config = base;
  config.model.variant = variants[v].variant;
  config.model.sampling_rate = variants[v].sampling_rate;
  config.model.k = hops[h];
  config.model.seed = seeds[s];
  config.task = tasks[t];
  config.epochs = epochs;
  return config;
}

bool ResultRow::same_outcome(const ResultRow& o) const {
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return variant == o.variant && k == o.k && layers == o.layers && task == o.task &&
         seed == o.seed && same(best_val_mape, o.best_val_mape) && same(test_mape, o.test_mape) &&
         best_epoch == o.best_epoch && ok == o.ok && message == o.message;
}

namespace {

ResultRow run_cell(const model::RunConfig& config, const StationDataset& dataset) {
  ResultRow row;
  row.variant = {config.model.variant, config.model.sampling_rate};
  row.k = config.model.k;
  row.layers = config.model.num_layers;
  row.task = config.task;
  row.seed = config.model.seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    model::Model m = model::assemble(config.model, dataset);
    const auto split = train::split_years(dataset.years(), config.model.seed);
    const auto report = train::train(m, dataset, config, split);
    row.best_val_mape = report.best_val_mape;
    row.test_mape = report.test_mape;
    row.best_epoch = report.best_epoch;
  } catch (const TrainingError& e) {
    row.ok = false;
    row.best_epoch = e.epoch();
    row.message = e.what();
  } catch (const Error& e) {
    row.ok = false;
    row.message = std::string(to_string(e.category())) + ": " + e.what();
  }
  if (!row.ok) {
    // results.csv has no quoting.
    std::replace(row.message.begin(), row.message.end(), ',', ';');
    std::replace(row.message.begin(), row.message.end(), '\n', ' ');
    row.best_val_mape = std::numeric_limits<double>::quiet_NaN();
    row.test_mape = std::numeric_limits<double>::quiet_NaN();
  }
  row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

}  // namespace

ExperimentResult run_grid(const GridSpec& spec, const StationDataset& dataset,
                          const std::function<void(const ResultRow&)>& on_row) {
  const std::size_t cells = spec.num_cells();
  if (cells == 0) fail(ErrorCategory::config, "grid has no cells");
  // Validate every cell before training any.
  for (std::size_t i = 0; i < cells; ++i) spec.cell(i).model.validate();

  ExperimentResult result;
  result.rows.resize(cells);
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells; i = next++) {
      result.rows[i] = run_cell(spec.cell(i), dataset);
      if (on_row) {
        std::lock_guard lock(report_mutex);
        on_row(result.rows[i]);
      }
    }
  };
  const std::size_t width = std::clamp<std::size_t>(spec.threads, 1, cells);
  if (width == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
  }
  return result;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<HopSummary> hop_medians(const ExperimentResult& result) {
  struct Acc {
    HopSummary summary;
    std::vector<double> test;
    std::vector<double> val;
  };
  std::vector<Acc> groups;
  for (const auto& row : result.rows) {
    if (!row.ok) continue;
    const std::string label = row.variant.label();
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Acc& a) {
      return a.summary.variant == label && a.summary.task == row.task && a.summary.k == row.k;
    });
    if (it == groups.end()) {
      groups.push_back({HopSummary{label, row.task, row.k, 0.0, 0.0, 0}, {}, {}});
      it = groups.end() - 1;
    }
    it->test.push_back(row.test_mape);
    it->val.push_back(row.best_val_mape);
  }
  std::vector<HopSummary> out;
  for (auto& g : groups) {
    g.summary.median_test_mape = median(g.test);
    g.summary.median_val_mape = median(g.val);
    g.summary.seeds = g.test.size();
    out.push_back(g.summary);
  }
  return out;
}

std::vector<HopSummary> best_hops(const ExperimentResult& result) {
  std::vector<HopSummary> best;
  for (const auto& s : hop_medians(result)) {
    auto it = std::find_if(best.begin(), best.end(), [&](const HopSummary& b) {
      return b.variant == s.variant && b.task == s.task;
    });
    if (it == best.end()) {
      best.push_back(s);
    } else if (s.median_test_mape < it->median_test_mape) {
      *it = s;
    }
  }
  return best;
}

}  // namespace metroflow::experiments
