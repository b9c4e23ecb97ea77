#include "metroflow/nn/layers.hpp"

#include <cmath>

#include "metroflow/error.hpp"

namespace metroflow::nn {

Var activate(Var x, Activation activation) {
  switch (activation) {
    case Activation::identity: return x;
    case Activation::relu: return ad::relu(x);
    case Activation::sigmoid: return ad::sigmoid(x);
  }
  return x;
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

ad::SegmentIndex make_segment_index(const NeighborList& neighbors, bool include_self) {
  ad::SegmentIndex index;
  index.offsets.reserve(neighbors.size() + 1);
  for (std::size_t v = 0; v < neighbors.size(); ++v) {
    bool self_done = !include_self;
    for (const auto& [u, w] : neighbors[v]) {
      if (!self_done && u > v) {
        index.sources.push_back(static_cast<std::uint32_t>(v));
        self_done = true;
      }
      if (u == v) continue;
      index.sources.push_back(static_cast<std::uint32_t>(u));
    }
    if (!self_done) index.sources.push_back(static_cast<std::uint32_t>(v));
    index.offsets.push_back(static_cast<std::uint32_t>(index.sources.size()));
  }
  return index;
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, const std::string& name)
    : weight(name + ".weight", glorot_uniform(in, out, rng)), bias(name + ".bias", Tensor(1, out)) {}

Var Linear::forward(Tape& tape, Var x) {
  if (x.cols() != in_width()) {
    fail(ErrorCategory::shape, weight.name + ": input width " + std::to_string(x.cols()) +
                                   ", expected " + std::to_string(in_width()));
  }
  return ad::add_bias(ad::matmul(x, tape.parameter(weight)), tape.parameter(bias));
}

Mlp::Mlp(const std::vector<std::size_t>& widths, std::mt19937_64& rng, Activation hidden,
         Activation output, const std::string& name)
    : hidden_(hidden), output_(output) {
  if (widths.size() < 2) fail(ErrorCategory::contract, name + ": an MLP needs at least one layer");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.emplace_back(widths[i], widths[i + 1], rng, name + "." + std::to_string(i));
  }
}

Var Mlp::forward(Tape& tape, Var x) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(tape, x);
    x = activate(x, i + 1 == layers_.size() ? output_ : hidden_);
  }
  return x;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

SageLayer::SageLayer(std::size_t d_in, std::size_t d_out, Aggregator aggregator,
                     std::mt19937_64& rng, const std::string& name, Activation activation)
    : d_in_(d_in), aggregator_(aggregator), activation_(activation) {
  if (aggregator == Aggregator::max_pool) {
    d_pool_ = d_out;
    pool_weight_ = Parameter(name + ".pool_weight", glorot_uniform(d_in, d_pool_, rng));
    pool_bias_ = Parameter(name + ".pool_bias", Tensor(1, d_pool_));
  } else {
    d_pool_ = d_in;
  }
  weight_ = Parameter(name + ".weight", glorot_uniform(d_in + d_pool_, d_out, rng));
  bias_ = Parameter(name + ".bias", Tensor(1, d_out));
}

Var SageLayer::aggregate(Tape& tape, Var h, const ad::SegmentIndex& neighbors,
                         std::optional<Var> edge_weights) {
  if (h.cols() != d_in_) {
    fail(ErrorCategory::shape, weight_.name + ": input width " + std::to_string(h.cols()) +
                                   ", expected " + std::to_string(d_in_));
  }
  if (aggregator_ == Aggregator::max_pool) {
    // W_pool·(w·h_u) = w·(h_u W_pool), so the transform runs once per vertex.
    Var pooled = ad::matmul(h, tape.parameter(pool_weight_));
    return ad::neighbor_max_pool(pooled, neighbors, edge_weights, tape.parameter(pool_bias_));
  }
  std::vector<double> inv_degree(neighbors.num_entries());
  for (std::size_t v = 0; v < neighbors.num_targets(); ++v) {
    const double inv = 1.0 / static_cast<double>(neighbors.degree(v));
    for (std::uint32_t e = neighbors.offsets[v]; e < neighbors.offsets[v + 1]; ++e) {
      inv_degree[e] = inv;
    }
  }
  return ad::neighbor_sum(h, neighbors, edge_weights, inv_degree);
}

Var SageLayer::forward(Tape& tape, Var h, const ad::SegmentIndex& neighbors,
                       std::optional<Var> edge_weights) {
  Var aggregated = aggregate(tape, h, neighbors, edge_weights);
  Var z = ad::matmul(ad::concat_cols(h, aggregated), tape.parameter(weight_));
  return activate(ad::add_bias(z, tape.parameter(bias_)), activation_);
}

SageParts SageLayer::forward_decomposed(Tape& tape, Var h, const ad::SegmentIndex& neighbors,
                                        std::optional<Var> edge_weights) {
  Var aggregated = aggregate(tape, h, neighbors, edge_weights);
  Var w = tape.parameter(weight_);
  Var self_block = ad::slice_rows(w, 0, d_in_);
  Var neighbor_block = ad::slice_rows(w, d_in_, d_in_ + d_pool_);
  return {ad::matmul(h, self_block),
          ad::add_bias(ad::matmul(aggregated, neighbor_block), tape.parameter(bias_))};
}

std::vector<Parameter*> SageLayer::parameters() {
  std::vector<Parameter*> out;
  if (aggregator_ == Aggregator::max_pool) {
    out.push_back(&pool_weight_);
    out.push_back(&pool_bias_);
  }
  out.push_back(&weight_);
  out.push_back(&bias_);
  return out;
}

GcnNeighborhood GcnNeighborhood::from_open(const ad::SegmentIndex& open) {
  GcnNeighborhood g;
  g.open_entries = open.num_entries();
  const std::size_t n = open.num_targets();
  for (std::size_t v = 0; v < n; ++v) {
    bool self_done = false;
    auto push = [&](std::uint32_t source, std::uint32_t entry) {
      g.closed.sources.push_back(source);
      g.open_entry.push_back(entry);
      g.norm.push_back(1.0 / std::sqrt(static_cast<double>(open.degree(source) + 1) *
                                       static_cast<double>(open.degree(v) + 1)));
    };
    for (std::uint32_t e = open.offsets[v]; e < open.offsets[v + 1]; ++e) {
      if (!self_done && open.sources[e] > v) {
        push(static_cast<std::uint32_t>(v), kSelf);
        self_done = true;
      }
      push(open.sources[e], e);
    }
    if (!self_done) push(static_cast<std::uint32_t>(v), kSelf);
    g.closed.offsets.push_back(static_cast<std::uint32_t>(g.closed.sources.size()));
  }
  return g;
}

GcnLayer::GcnLayer(std::size_t d_in, std::size_t d_out, std::mt19937_64& rng,
                   const std::string& name, Activation activation)
    : activation_(activation),
      weight_(name + ".weight", glorot_uniform(d_in, d_out, rng)),
      bias_(name + ".bias", Tensor(1, d_out)) {}

Var GcnLayer::forward(Tape& tape, Var h, const GcnNeighborhood& neighbors,
                      std::optional<Var> edge_weights) {
  if (h.cols() != in_width()) {
    fail(ErrorCategory::shape, weight_.name + ": input width " + std::to_string(h.cols()) +
                                   ", expected " + std::to_string(in_width()));
  }
  Var projected = ad::matmul(h, tape.parameter(weight_));
  std::optional<Var> coef;
  if (edge_weights) {
    if (edge_weights->rows() != neighbors.open_entries || edge_weights->cols() != 1) {
      fail(ErrorCategory::shape, weight_.name + ": edge weights " +
                                     edge_weights->value().shape_string() + " for " +
                                     std::to_string(neighbors.open_entries) + " entries");
    }
    // Append a constant 1 for the self-loop and route each closed entry to its weight.
    Var with_self = ad::concat_rows(*edge_weights, tape.constant(Tensor(1, 1, 1.0)));
    std::vector<std::uint32_t> route(neighbors.open_entry);
    for (auto& r : route) {
      if (r == GcnNeighborhood::kSelf) r = static_cast<std::uint32_t>(neighbors.open_entries);
    }
    coef = ad::gather_rows(with_self, route);
  }
  Var summed = ad::neighbor_sum(projected, neighbors.closed, coef, neighbors.norm);
  return activate(ad::add_bias(summed, tape.parameter(bias_)), activation_);
}

std::vector<Parameter*> GcnLayer::parameters() { return {&weight_, &bias_}; }

EdgeWeightLearner::EdgeWeightLearner(std::size_t hidden, std::mt19937_64& rng)
    : mlp_({kInputs, hidden, 1}, rng, Activation::relu, Activation::sigmoid, "edge_learner") {}

Var EdgeWeightLearner::weights(Tape& tape, Var diffs) {
  if (diffs.cols() != kInputs) {
    fail(ErrorCategory::shape, "edge weight learner expects 3 social differences per edge, got " +
                                   std::to_string(diffs.cols()));
  }
  return mlp_.forward(tape, diffs);
}

double EdgeWeightLearner::weight(const std::array<double, 3>& diff) {
  Tape tape(false);
  Var in = tape.constant(Tensor(1, kInputs, std::vector<double>(diff.begin(), diff.end())));
  return weights(tape, in).value()(0, 0);
}

double edge_weight(EdgeWeightLearner& learner, const SocialFeatures& a, const SocialFeatures& b,
                   const SocialScaler& scaler) {
  return learner.weight(scaler.diff(a, b));
}

Var temporal_forward(Tape& tape, Mlp& mlp, Var station_series) {
  if (station_series.cols() != 8) {
    fail(ErrorCategory::shape, "temporal branch expects 8 flows per station, got " +
                                   std::to_string(station_series.cols()));
  }
  return mlp.forward(tape, station_series);
}

}  // namespace metroflow::nn
