#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metroflow/train/train.hpp"

namespace metroflow::experiments {

struct VariantSpec {
  model::Variant variant = model::Variant::main_body;
  std::optional<double> sampling_rate;

  /// "main_body", "kh_0.9", ...
  std::string label() const;
  /// Inverse of label(); config error on unknown names.
  static VariantSpec parse(std::string_view label);
  friend bool operator==(const VariantSpec&, const VariantSpec&) = default;
};

struct GridSpec {
  std::vector<VariantSpec> variants;
  std::vector<int> hops;
  std::vector<Task> tasks;
  std::vector<std::uint64_t> seeds;
  int epochs = 1000;
  /// Widths, depth, loss and other settings shared by every cell.
  model::RunConfig base;
  std::size_t threads = 1;

  /// main_body, kt, kh 0.9, kth 0.9, sage_baseline, gcn_baseline × hops 1..6 ×
  /// mid-entry, mid-exit × seeds 1..3.
  static GridSpec reduced_default();
  /// Every variant (sampling rates 0.6..0.9) × hops 1..10 × all 10 tasks.
  static GridSpec full();
  std::size_t num_cells() const;
  /// Config for cell i in canonical order (variant, hop, task, seed).
  model::RunConfig cell(std::size_t i) const;
};

struct ResultRow {
  VariantSpec variant;
  int k = 1;
  std::size_t layers = 3;
  Task task;
  std::uint64_t seed = 0;
  double best_val_mape = 0.0;
  double test_mape = 0.0;
  int best_epoch = 0;
  bool ok = true;
  std::string message;  // failure reason
  double wall_time = 0.0;

  /// Everything except wall_time, which varies from run to run.
  bool same_outcome(const ResultRow& other) const;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
};

/// Trains every cell (in a pool of spec.threads workers) and returns one row
/// per cell in canonical order. A failing cell becomes a row with ok = false.
ExperimentResult run_grid(const GridSpec& spec, const StationDataset& dataset,
                          const std::function<void(const ResultRow&)>& on_row = {});

/// Median of the values; NaN for an empty list.
double median(std::vector<double> values);

struct HopSummary {
  std::string variant;  // VariantSpec::label()
  Task task;
  int k = 1;
  double median_test_mape = 0.0;
  double median_val_mape = 0.0;
  std::size_t seeds = 0;
};

/// Median over seeds of every (variant, task, hop) with at least one
/// successful run, in first-appearance order.
std::vector<HopSummary> hop_medians(const ExperimentResult& result);
/// Per (variant, task): the hop with minimal median test MAPE (first on ties).
std::vector<HopSummary> best_hops(const ExperimentResult& result);

// Over-smoothing diagnostic: one-layer GCN against one-layer mean-aggregator
// SAGE on a dense k-hop graph over a connected region.
struct DiagnosticSpec {
  Task task{3, Direction::entry};
  int k = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int epochs = 1000;
  std::size_t hidden_width = 64;
};

struct DiagnosticRun {
  std::uint64_t seed = 0;
  int year = 0;  // first test year, used for the per-vertex records
  double gcn_test_mape = 0.0;
  double sage_test_mape = 0.0;
  std::vector<double> truth;
  std::vector<double> gcn_predictions;
  std::vector<double> sage_predictions;
  Tensor self_part;      // n×hidden, first SAGE layer before activation
  Tensor neighbor_part;  // n×hidden
};

struct OverlapStat {
  int k = 1;
  double mean_overlap = 0.0;       // mean Jaccard over vertex pairs
  double full_fraction = 0.0;      // share of vertices adjacent to all others
};

struct OversmoothingReport {
  std::vector<std::string> stations;
  Task task;
  int k = 10;
  /// Vertices adjacent to every other vertex in the k-hop graph.
  std::vector<std::size_t> fully_connected;
  std::vector<OverlapStat> overlap;  // k = 1..spec.k
  std::vector<DiagnosticRun> runs;
};

/// Stations of the given zones.
std::vector<std::size_t> select_zones(const StationDataset& dataset, const std::vector<int>& zones);
/// Stations within `radius` hops of `center`.
std::vector<std::size_t> select_ball(const StationDataset& dataset, std::size_t center, int radius);

/// Diagnostic error if the selection is empty or induces a disconnected graph.
OversmoothingReport oversmoothing_diagnostic(const StationDataset& dataset,
                                             const std::vector<std::size_t>& stations,
                                             const DiagnosticSpec& spec);

/// results.csv (canonical row order, no timings), timings.csv, one table per
/// task sorted by MAPE, and a MAPE-vs-hop SVG per task.
void emit_report(const ExperimentResult& result, const std::filesystem::path& out_dir);
/// Per-vertex and per-seed CSVs, overlap statistics and a predictions-vs-truth SVG.
void emit_report(const OversmoothingReport& report, const std::filesystem::path& out_dir);

std::string results_csv_header();
/// Parses a results.csv back into rows (wall_time is not stored there).
ExperimentResult read_results(const std::filesystem::path& path);
void write_results(const ExperimentResult& result, const std::filesystem::path& path);

}  // namespace metroflow::experiments
