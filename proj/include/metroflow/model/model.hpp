#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "metroflow/data/dataset.hpp"
#include "metroflow/nn/layers.hpp"

namespace metroflow::model {

enum class Variant { main_body, kt, kh, kth, gcn_baseline, sage_baseline, gcn_learned_weights };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view name);  // config error if unknown

enum class Loss { mse, mae };
std::string_view to_string(Loss loss);
Loss parse_loss(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::main_body;
  int k = 1;
  /// Keep-probability for the clique-expanded line graph (kh/kth only).
  std::optional<double> sampling_rate;
  std::size_t num_layers = 3;
  std::size_t hidden_width = 64;
  std::size_t temporal_hidden = 32;
  std::size_t temporal_width = 16;
  std::size_t fusion_width = 64;
  std::size_t edge_hidden = 16;
  std::uint64_t seed = 1;
  nn::Aggregator aggregator = nn::Aggregator::max_pool;
  /// 2: concat → fusion_width → 1 with relu between; 1: a single linear map.
  int head_layers = 2;
  /// Put each station into its own SAGE neighborhood.
  bool closed_neighborhoods = false;

  bool uses_temporal() const { return variant == Variant::kt || variant == Variant::kth; }
  bool uses_hypergraph() const { return variant == Variant::kh || variant == Variant::kth; }
  bool uses_gcn() const {
    return variant == Variant::gcn_baseline || variant == Variant::gcn_learned_weights;
  }
  bool uses_learner() const {
    return variant != Variant::gcn_baseline && variant != Variant::sage_baseline;
  }
  /// Config error on any inconsistency.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One training run: the model plus everything the optimizer loop needs.
struct RunConfig {
  ModelConfig model;
  Task task{3, Direction::entry};
  int epochs = 1000;
  Loss loss = Loss::mse;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Flat "key = value" text, one key per line, '#' starts a comment.
/// Keys: variant, k, sampling_rate, seed, layers, hidden_width, temporal_hidden,
/// temporal_width, fusion_width, edge_hidden, aggregator, head_layers,
/// closed_neighborhoods, task, epochs, loss. Unknown keys are config errors.
RunConfig parse_run_config(std::string_view text, RunConfig defaults = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig defaults = {});
std::string serialize(const RunConfig& config);

/// Per-column affine standardization z = (x - mean) / scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  /// Fits on the rows of x; zero-variance columns get scale 1.
  static Standardizer fit(const Tensor& x);
  static Standardizer identity(std::size_t cols);
  Tensor apply(const Tensor& x) const;
  Tensor invert(const Tensor& z) const;
};

/// Topology shared by every forward pass; built once per model.
struct Topology {
  std::size_t num_stations = 0;
  ad::SegmentIndex khop;           // open or closed neighborhoods for SAGE
  nn::GcnNeighborhood gcn;         // closed neighborhoods for GCN
  Tensor edge_diffs;               // one row of social differences per khop entry
  ad::SegmentIndex hyper;          // open neighborhoods of the sampled line graph
};

// The assembled network: a k-hop convolution stack with an
// optional edge-weight learner, optional temporal and hypergraph add-ons, and
// a fusion head over the concatenated branch outputs in the fixed order
// k-hop, temporal, hypergraph.
class Model {
 public:
  Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  const Topology& topology() const { return topology_; }

  /// features holds B stacked blocks of n×8 standardized rows; result is (B·n)×1
  /// in standardized target units.
  Var forward(Tape& tape, Var features);
  /// Self and neighbor addends of the first SAGE layer (single block).
  nn::SageParts first_layer_parts(Tape& tape, Var features);

  /// Learned weight of every k-hop entry (all ones for uniform variants).
  std::vector<double> edge_weights();

  std::vector<Parameter*> parameters();
  std::size_t parameter_count();

  Standardizer& feature_scaler() { return feature_scaler_; }
  Standardizer& target_scaler() { return target_scaler_; }
  const Standardizer& feature_scaler() const { return feature_scaler_; }
  const Standardizer& target_scaler() const { return target_scaler_; }
  std::optional<Task> trained_task() const { return trained_task_; }
  void set_trained_task(Task task) { trained_task_ = task; }

  std::vector<nn::SageLayer>& sage_layers() { return sage_; }
  std::vector<nn::GcnLayer>& gcn_layers() { return gcn_; }
  std::vector<nn::SageLayer>& hyper_layers() { return hyper_; }
  nn::EdgeWeightLearner* learner() { return config_.uses_learner() ? &learner_ : nullptr; }
  nn::Mlp* temporal() { return config_.uses_temporal() ? &temporal_ : nullptr; }
  nn::Mlp& head() { return head_; }
  std::size_t fusion_width() const;

 private:
  friend Model assemble(const ModelConfig& config, const StationDataset& dataset);

  ModelConfig config_;
  Topology topology_;
  std::vector<nn::SageLayer> sage_;
  std::vector<nn::GcnLayer> gcn_;
  std::vector<nn::SageLayer> hyper_;
  nn::EdgeWeightLearner learner_;
  nn::Mlp temporal_;
  nn::Mlp head_;
  Standardizer feature_scaler_ = Standardizer::identity(kNumFeatures);
  Standardizer target_scaler_ = Standardizer::identity(1);
  std::optional<Task> trained_task_;
};

/// Builds topology and parameters. Each branch draws from its own seeded
/// stream, so adding or removing a branch leaves the others unchanged.
Model assemble(const ModelConfig& config, const StationDataset& dataset);

/// Independent generator for one named component of a seeded model.
std::mt19937_64 component_rng(std::uint64_t seed, std::uint64_t component);

/// Predictions in original flow units for one year. Contract error if the
/// model was trained for another task.
std::vector<double> predict_task(Model& model, const StationDataset& dataset, int year, Task task);

/// Versioned binary checkpoint: run config, task, scalers and every parameter
/// with its shape.
void save_checkpoint(Model& model, const RunConfig& run, const std::filesystem::path& path);
struct Checkpoint {
  RunConfig run;
  Model model;
};
Checkpoint load_checkpoint(const std::filesystem::path& path, const StationDataset& dataset);

}  // namespace metroflow::model
