#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "metroflow/autodiff/ops.hpp"
#include "metroflow/data/social.hpp"
#include "metroflow/graph/topology.hpp"

namespace metroflow::nn {

enum class Activation { identity, relu, sigmoid };
enum class Aggregator { max_pool, mean };

Var activate(Var x, Activation activation);

/// Uniform in ±sqrt(6 / (rows + cols)).
Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

/// Ascending neighbor lists as a segment index, optionally with each vertex
/// inserted into its own list (closed neighborhoods).
ad::SegmentIndex make_segment_index(const NeighborList& neighbors, bool include_self = false);

struct Linear {
  Parameter weight;  // in×out
  Parameter bias;    // 1×out

  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, const std::string& name);

  Var forward(Tape& tape, Var x);
  std::size_t in_width() const { return weight.value.rows(); }
  std::size_t out_width() const { return weight.value.cols(); }
};

class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}; at least one layer.
  Mlp(const std::vector<std::size_t>& widths, std::mt19937_64& rng, Activation hidden,
      Activation output, const std::string& name);

  Var forward(Tape& tape, Var x);
  std::vector<Parameter*> parameters();
  std::size_t in_width() const { return layers_.front().in_width(); }
  std::size_t out_width() const { return layers_.back().out_width(); }
  std::vector<Linear>& layers() { return layers_; }

 private:
  std::vector<Linear> layers_;
  Activation hidden_ = Activation::relu;
  Activation output_ = Activation::identity;
};

/// Self and neighbor addends before the activation. The layer bias is
/// attributed to the neighbor part.
struct SageParts {
  Var self_part;
  Var neighbor_part;
};

// GraphSAGE convolution. Neighbor rows are scaled by their edge weight before
// aggregation; isolated vertices aggregate to the zero vector.
class SageLayer {
 public:
  SageLayer() = default;
  SageLayer(std::size_t d_in, std::size_t d_out, Aggregator aggregator, std::mt19937_64& rng,
            const std::string& name, Activation activation = Activation::relu);

  /// Max-pool: max_u relu(W_pool·(w_uv h_u) + b). Mean: mean_u (w_uv h_u).
  Var aggregate(Tape& tape, Var h, const ad::SegmentIndex& neighbors,
                std::optional<Var> edge_weights);
  /// σ(W · concat(h_v, h_N(v)) + b).
  Var forward(Tape& tape, Var h, const ad::SegmentIndex& neighbors,
              std::optional<Var> edge_weights);
  SageParts forward_decomposed(Tape& tape, Var h, const ad::SegmentIndex& neighbors,
                               std::optional<Var> edge_weights);

  std::vector<Parameter*> parameters();
  Aggregator aggregator() const { return aggregator_; }
  Activation activation() const { return activation_; }
  std::size_t in_width() const { return d_in_; }
  std::size_t pool_width() const { return d_pool_; }
  std::size_t out_width() const { return weight_.value.cols(); }

  Parameter& pool_weight() { return pool_weight_; }
  Parameter& pool_bias() { return pool_bias_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  std::size_t d_in_ = 0;
  std::size_t d_pool_ = 0;
  Aggregator aggregator_ = Aggregator::max_pool;
  Activation activation_ = Activation::relu;
  Parameter pool_weight_;  // d_in×d_pool (max-pool only)
  Parameter pool_bias_;    // 1×d_pool (max-pool only)
  Parameter weight_;       // (d_in + d_pool)×d_out
  Parameter bias_;         // 1×d_out
};

/// Closed neighborhoods with symmetric degree normalization
/// 1/sqrt((deg(j)+1)(deg(v)+1)), built from open neighbor lists.
struct GcnNeighborhood {
  static constexpr std::uint32_t kSelf = 0xffffffffU;

  ad::SegmentIndex closed;
  std::vector<double> norm;
  /// Entry index into the open index, or kSelf for the self-loop.
  std::vector<std::uint32_t> open_entry;
  std::size_t open_entries = 0;

  static GcnNeighborhood from_open(const ad::SegmentIndex& open);
};

class GcnLayer {
 public:
  GcnLayer() = default;
  GcnLayer(std::size_t d_in, std::size_t d_out, std::mt19937_64& rng, const std::string& name,
           Activation activation = Activation::relu);

  /// σ(b + Σ_{j ∈ N(v)∪{v}} (w_jv / c_jv) · h_j W). Learned edge weights, when
  /// given, are per open-neighborhood entry; the self-loop weight is 1.
  Var forward(Tape& tape, Var h, const GcnNeighborhood& neighbors,
              std::optional<Var> edge_weights);

  std::vector<Parameter*> parameters();
  std::size_t in_width() const { return weight_.value.rows(); }
  std::size_t out_width() const { return weight_.value.cols(); }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Activation activation_ = Activation::relu;
  Parameter weight_;
  Parameter bias_;
};

/// Shared MLP mapping standardized absolute social differences
/// (zone, housing price, life expectancy) to an edge weight in (0,1).
class EdgeWeightLearner {
 public:
  static constexpr std::size_t kInputs = 3;

  EdgeWeightLearner() = default;
  EdgeWeightLearner(std::size_t hidden, std::mt19937_64& rng);

  /// diffs is E×3; result is E×1.
  Var weights(Tape& tape, Var diffs);
  double weight(const std::array<double, 3>& diff);

  std::vector<Parameter*> parameters() { return mlp_.parameters(); }
  Mlp& mlp() { return mlp_; }

 private:
  Mlp mlp_;
};

double edge_weight(EdgeWeightLearner& learner, const SocialFeatures& a, const SocialFeatures& b,
                   const SocialScaler& scaler);

/// Per-station embedding of the 8 non-target flows through a shared MLP.
Var temporal_forward(Tape& tape, Mlp& mlp, Var station_series);

}  // namespace metroflow::nn
