#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metroflow/autodiff/tensor.hpp"
#include "metroflow/data/social.hpp"
#include "metroflow/graph/topology.hpp"

namespace metroflow {

enum class Direction { entry = 0, exit = 1 };

inline constexpr int kNumTimestamps = 5;
inline constexpr int kNumColumns = 2 * kNumTimestamps;
inline constexpr int kNumFeatures = 8;

/// Traffic column for (timestamp 1..5, direction):
/// early-entry, early-exit, am-entry, am-exit, ..., late-exit.
constexpr int column_index(int timestamp, Direction direction) {
  return (timestamp - 1) * 2 + static_cast<int>(direction);
}

std::string_view timestamp_name(int timestamp);  // "early", "am", "mid", "pm", "late"
std::string_view direction_name(Direction direction);

/// One prediction target: a (timestamp, direction) pair.
struct Task {
  int timestamp = 1;
  Direction direction = Direction::entry;

  /// "mid-entry", "late-exit", ...
  std::string name() const;
  static Task parse(std::string_view name);
  static std::vector<Task> all();

  /// Input columns: both directions of every other timestamp, ascending.
  std::array<int, kNumFeatures> feature_columns() const;
  int target_column() const { return column_index(timestamp, direction); }

  friend bool operator==(const Task&, const Task&) = default;
};

struct Line {
  std::string id;
  std::vector<std::size_t> stations;
};

// Per-station traffic (10 columns per year), social features, line memberships
// and the base metro graph. Immutable once built.
class StationDataset {
 public:
  StationDataset() = default;
  /// traffic is laid out [station][year][column]. Validates all invariants.
  StationDataset(std::vector<std::string> stations, std::vector<int> years,
                 std::vector<double> traffic, std::vector<SocialFeatures> social,
                 std::vector<Line> lines, BaseGraph base_graph);

  std::size_t num_stations() const noexcept { return stations_.size(); }
  std::size_t num_years() const noexcept { return years_.size(); }
  const std::vector<std::string>& stations() const noexcept { return stations_; }
  const std::vector<int>& years() const noexcept { return years_; }
  const std::vector<SocialFeatures>& social() const noexcept { return social_; }
  const std::vector<Line>& lines() const noexcept { return lines_; }
  const BaseGraph& base_graph() const noexcept { return base_graph_; }
  const std::vector<double>& traffic() const noexcept { return traffic_; }

  double flow(std::size_t station, std::size_t year_index, int column) const {
    return traffic_[(station * years_.size() + year_index) * kNumColumns + column];
  }
  std::size_t year_index(int year) const;  // data error if absent
  std::size_t station_index(std::string_view id) const;  // reference error if absent

  /// Line memberships as hyperedges (unit weights).
  Hypergraph hypergraph() const;

  /// Induced sub-dataset on the given stations (kept in the given order).
  /// Lines are restricted to the subset; lines left with fewer than two
  /// stations are dropped.
  StationDataset subset(const std::vector<std::size_t>& stations) const;

  friend bool operator==(const StationDataset& a, const StationDataset& b);

 private:
  std::vector<std::string> stations_;
  std::vector<int> years_;
  std::vector<double> traffic_;
  std::vector<SocialFeatures> social_;
  std::vector<Line> lines_;
  BaseGraph base_graph_;
};

/// Features and target of one task for one year.
struct TaskMatrix {
  Tensor features;  // n×8, columns in Task::feature_columns() order
  Tensor target;    // n×1
  Task task;
  int year = 0;
};

TaskMatrix build_task(const StationDataset& dataset, int year, Task task);

/// Standardized absolute social differences between two stations.
std::array<double, 3> social_diff_features(const StationDataset& dataset, std::string_view a,
                                           std::string_view b, const SocialScaler& scaler);

struct DatasetPaths {
  std::filesystem::path traffic;
  std::filesystem::path social;
  std::filesystem::path edges;
  std::filesystem::path lines;

  /// traffic.csv, social.csv, edges.csv, lines.csv inside dir.
  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

StationDataset load_dataset(const DatasetPaths& paths);
void save_dataset(const StationDataset& dataset, const DatasetPaths& paths);

struct SynthParams {
  std::size_t n_stations = 40;
  std::size_t n_years = 13;
  std::size_t n_lines = 4;
  std::uint64_t seed = 1;
  /// Timestamp whose entry and exit flows follow the neighbor-coupling rule.
  int coupled_timestamp = 3;
  /// Weight of the social-weighted neighbor mean and of the station's own flows.
  double alpha = 0.6;
  double beta = 0.4;
  /// Hop radius of the neighbor mean.
  int coupling_hops = 3;
  /// Sharpness of the social-similarity kernel.
  double kernel_sharpness = 1.5;
  /// Relative noise on coupled flows.
  double noise = 0.02;
};

StationDataset synthesize_dataset(const SynthParams& params);

/// The generator's coupling rule, exposed so tests can refit it:
///   flow(v) = alpha·Σ_u ω_uv·own(u) / Σ_u ω_uv + beta·own(v)
/// over 1 ≤ d(u,v) ≤ coupling_hops, own(u) = mean of u's four other-timestamp
/// flows in the target direction, ω_uv = exp(-sharpness·Σ standardized |Δsocial|).
struct CouplingTerms {
  std::vector<double> neighbor_mean;  // per station
  std::vector<double> own;            // per station
};

CouplingTerms coupling_terms(const StationDataset& dataset, const SynthParams& params,
                             std::size_t year_index, Direction direction);

}  // namespace metroflow
