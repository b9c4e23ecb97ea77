#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace metroflow {

/// Undirected, unweighted station graph with a zero diagonal.
class BaseGraph {
 public:
  BaseGraph() = default;
  /// Builds from index pairs. Duplicate edges are merged; self-loops are rejected.
  BaseGraph(std::vector<std::string> station_ids,
            const std::vector<std::pair<std::size_t, std::size_t>>& edges);

  std::size_t size() const noexcept { return n_; }
  bool adjacent(std::size_t i, std::size_t j) const { return adj_[i * n_ + j] != 0; }
  const std::vector<std::string>& station_ids() const noexcept { return ids_; }
  const std::vector<std::uint8_t>& adjacency() const noexcept { return adj_; }
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;  // i < j, sorted

  /// Induced subgraph on the given vertices (in the given order).
  BaseGraph induced(const std::vector<std::size_t>& vertices) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> adj_;
  std::vector<std::string> ids_;
};

/// Stations linked iff their shortest-path distance in the base graph is 1..k.
struct KHopGraph {
  int k = 1;
  std::size_t n = 0;
  std::vector<std::uint8_t> adj;

  bool adjacent(std::size_t i, std::size_t j) const { return adj[i * n + j] != 0; }
  std::size_t degree(std::size_t v) const;
  std::size_t num_edges() const;  // undirected
};

/// Metro lines as hyperedges over stations.
struct Hypergraph {
  std::size_t num_vertices = 0;
  std::size_t num_edges = 0;
  std::vector<std::uint8_t> incidence;  // |V|×|E|, row-major
  std::vector<double> edge_weights;     // |E|, positive

  bool contains(std::size_t v, std::size_t e) const {
    return incidence[v * num_edges + e] != 0;
  }

  /// One hyperedge per member list. Validates that each hyperedge has at least
  /// two vertices and every vertex lies on some hyperedge; errors name the
  /// offending station when ids are supplied. Weights default to 1.
  static Hypergraph from_members(std::size_t num_vertices,
                                 const std::vector<std::vector<std::size_t>>& members,
                                 const std::vector<std::string>& vertex_names = {},
                                 std::vector<double> weights = {});
};

/// Symmetric, nonnegative weighted adjacency.
struct WeightedGraph {
  std::size_t n = 0;
  std::vector<double> weights;  // n×n row-major

  double operator()(std::size_t i, std::size_t j) const { return weights[i * n + j]; }
};

using NeighborList = std::vector<std::vector<std::pair<std::size_t, double>>>;

KHopGraph build_khop(const BaseGraph& graph, int k);

/// Normalized clique expansion
///   D_V^{-1/2} · M · Z · D_E^{-1} · Mᵀ · D_V^{-1/2}
/// with D_V[v] = Σ_e Z[e]·M[v][e] and D_E[e] = Σ_v M[v][e].
WeightedGraph clique_expand(const Hypergraph& hypergraph);

/// Hadamard product with a symmetric Bernoulli(keep_rate) mask over the
/// strict upper triangle; the diagonal is kept. Deterministic in seed.
WeightedGraph sample_adjacency(const WeightedGraph& graph, double keep_rate, std::uint64_t seed);

/// Neighbors j ≠ i with weight > threshold, ascending by index.
NeighborList neighbor_sets(const WeightedGraph& graph, double threshold = 0.0);
NeighborList neighbor_sets(const KHopGraph& graph);

/// Jaccard similarity of the open neighborhoods of u and v (0 if both empty).
double neighborhood_overlap(const KHopGraph& graph, std::size_t u, std::size_t v);

/// Hop distances from source; -1 for unreachable vertices.
std::vector<int> bfs_distances(const BaseGraph& graph, std::size_t source);

bool is_connected(const BaseGraph& graph);

}  // namespace metroflow
