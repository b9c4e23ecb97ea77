#include "metroflow/graph/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <set>

#include "metroflow/error.hpp"

namespace metroflow {

BaseGraph::BaseGraph(std::vector<std::string> station_ids,
                     const std::vector<std::pair<std::size_t, std::size_t>>& edges)
    : n_(station_ids.size()), adj_(n_ * n_, 0), ids_(std::move(station_ids)) {
  for (auto [a, b] : edges) {
    if (a >= n_ || b >= n_) {
      fail(ErrorCategory::reference, "edge (" + std::to_string(a) + "," + std::to_string(b) +
                                         ") references a vertex outside 0.." +
                                         std::to_string(n_));
    }
    if (a == b) fail(ErrorCategory::construction, "self-loop at station '" + ids_[a] + "'");
    adj_[a * n_ + b] = 1;
    adj_[b * n_ + a] = 1;
  }
}

std::vector<std::pair<std::size_t, std::size_t>> BaseGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if (adjacent(i, j)) out.emplace_back(i, j);
  return out;
}

BaseGraph BaseGraph::induced(const std::vector<std::size_t>& vertices) const {
  std::vector<std::string> ids;
  ids.reserve(vertices.size());
  for (std::size_t v : vertices) ids.push_back(ids_.at(v));
  std::vector<std::pair<std::size_t, std::size_t>> sub_edges;
  for (std::size_t a = 0; a < vertices.size(); ++a)
    for (std::size_t b = a + 1; b < vertices.size(); ++b)
      if (adjacent(vertices[a], vertices[b])) sub_edges.emplace_back(a, b);
  return BaseGraph(std::move(ids), sub_edges);
}

std::size_t KHopGraph::degree(std::size_t v) const {
  std::size_t d = 0;
  for (std::size_t j = 0; j < n; ++j) d += adj[v * n + j];
  return d;
}

std::size_t KHopGraph::num_edges() const {
  std::size_t total = 0;
  for (auto a : adj) total += a;
  return total / 2;
}

KHopGraph build_khop(const BaseGraph& graph, int k) {
  if (k < 1) fail(ErrorCategory::contract, "k-hop graph needs k >= 1, got " + std::to_string(k));
  const std::size_t n = graph.size();
  const std::size_t words = (n + 63) / 64;
  using Row = std::vector<std::uint64_t>;

  std::vector<Row> base(n, Row(words, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (graph.adjacent(i, j)) base[i][j / 64] |= std::uint64_t{1} << (j % 64);

  // reach_{t+1}[i] = reach_t[i] ∪ ⋃_{j ∈ reach_t[i]} A[j]: the support of A + A² + … + A^t.
  std::vector<Row> reach = base;
  for (int step = 1; step < k; ++step) {
    std::vector<Row> next = reach;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if ((reach[i][j / 64] >> (j % 64)) & 1U) {
          for (std::size_t w = 0; w < words; ++w) next[i][w] |= base[j][w];
        }
      }
      changed = changed || next[i] != reach[i];
    }
    reach = std::move(next);
    if (!changed) break;
  }

  KHopGraph out;
  out.k = k;
  out.n = n;
  out.adj.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && ((reach[i][j / 64] >> (j % 64)) & 1U)) out.adj[i * n + j] = 1;
  return out;
}

Hypergraph Hypergraph::from_members(std::size_t num_vertices,
                                    const std::vector<std::vector<std::size_t>>& members,
                                    const std::vector<std::string>& vertex_names,
                                    std::vector<double> weights) {
  auto name = [&](std::size_t v) {
    return v < vertex_names.size() ? "'" + vertex_names[v] + "'" : std::to_string(v);
  };
  Hypergraph h;
  h.num_vertices = num_vertices;
  h.num_edges = members.size();
  h.incidence.assign(num_vertices * h.num_edges, 0);
  if (weights.empty()) weights.assign(h.num_edges, 1.0);
  if (weights.size() != h.num_edges) {
    fail(ErrorCategory::construction, "hyperedge weight count does not match hyperedge count");
  }
  for (std::size_t e = 0; e < members.size(); ++e) {
    if (!(weights[e] > 0.0) || !std::isfinite(weights[e])) {
      fail(ErrorCategory::construction, "hyperedge " + std::to_string(e) + " has non-positive weight");
    }
    for (std::size_t v : members[e]) {
      if (v >= num_vertices) {
        fail(ErrorCategory::reference, "hyperedge " + std::to_string(e) + " names vertex " +
                                           std::to_string(v) + " outside 0.." +
                                           std::to_string(num_vertices));
      }
      h.incidence[v * h.num_edges + e] = 1;
    }
  }
  for (std::size_t e = 0; e < h.num_edges; ++e) {
    std::size_t size = 0;
    for (std::size_t v = 0; v < num_vertices; ++v) size += h.contains(v, e);
    if (size < 2) {
      fail(ErrorCategory::construction,
           "hyperedge " + std::to_string(e) + " has " + std::to_string(size) + " vertices, needs >= 2");
    }
  }
  for (std::size_t v = 0; v < num_vertices; ++v) {
    bool any = false;
    for (std::size_t e = 0; e < h.num_edges && !any; ++e) any = h.contains(v, e);
    if (!any) fail(ErrorCategory::construction, "station " + name(v) + " lies on no hyperedge");
  }
  h.edge_weights = std::move(weights);
  return h;
}

WeightedGraph clique_expand(const Hypergraph& h) {
  const std::size_t nv = h.num_vertices, ne = h.num_edges;
  std::vector<double> vertex_degree(nv, 0.0);
  std::vector<double> edge_degree(ne, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    for (std::size_t e = 0; e < ne; ++e) {
      if (!h.contains(v, e)) continue;
      vertex_degree[v] += h.edge_weights[e];
      edge_degree[e] += 1.0;
    }
  }
  for (std::size_t v = 0; v < nv; ++v) {
    if (!(vertex_degree[v] > 0.0)) {
      fail(ErrorCategory::construction, "vertex " + std::to_string(v) + " has zero degree");
    }
  }
  std::vector<double> inv_sqrt_dv(nv);
  for (std::size_t v = 0; v < nv; ++v) inv_sqrt_dv[v] = 1.0 / std::sqrt(vertex_degree[v]);

  WeightedGraph out;
  out.n = nv;
  out.weights.assign(nv * nv, 0.0);
  for (std::size_t i = 0; i < nv; ++i) {
    for (std::size_t j = i; j < nv; ++j) {
      double acc = 0.0;
      for (std::size_t e = 0; e < ne; ++e) {
        if (h.contains(i, e) && h.contains(j, e)) acc += h.edge_weights[e] / edge_degree[e];
      }
      const double value = inv_sqrt_dv[i] * acc * inv_sqrt_dv[j];
      out.weights[i * nv + j] = value;
      out.weights[j * nv + i] = value;
    }
  }
  return out;
}

WeightedGraph sample_adjacency(const WeightedGraph& graph, double keep_rate, std::uint64_t seed) {
  if (!(keep_rate >= 0.0 && keep_rate <= 1.0)) {
    fail(ErrorCategory::contract, "keep rate must lie in [0,1], got " + std::to_string(keep_rate));
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(keep_rate);
  WeightedGraph out = graph;
  const std::size_t n = graph.n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!keep(rng)) {
        out.weights[i * n + j] = 0.0;
        out.weights[j * n + i] = 0.0;
      }
    }
  }
  return out;
}

NeighborList neighbor_sets(const WeightedGraph& graph, double threshold) {
  NeighborList out(graph.n);
  for (std::size_t i = 0; i < graph.n; ++i)
    for (std::size_t j = 0; j < graph.n; ++j)
      if (i != j && graph(i, j) > threshold) out[i].emplace_back(j, graph(i, j));
  return out;
}

NeighborList neighbor_sets(const KHopGraph& graph) {
  NeighborList out(graph.n);
  for (std::size_t i = 0; i < graph.n; ++i)
    for (std::size_t j = 0; j < graph.n; ++j)
      if (graph.adjacent(i, j)) out[i].emplace_back(j, 1.0);
  return out;
}

double neighborhood_overlap(const KHopGraph& graph, std::size_t u, std::size_t v) {
  std::size_t both = 0, either = 0;
  for (std::size_t j = 0; j < graph.n; ++j) {
    const bool a = graph.adjacent(u, j);
    const bool b = graph.adjacent(v, j);
    both += a && b;
    either += a || b;
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

std::vector<int> bfs_distances(const BaseGraph& graph, std::size_t source) {
  std::vector<int> dist(graph.size(), -1);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t w = 0; w < graph.size(); ++w) {
      if (graph.adjacent(u, w) && dist[w] < 0) {
        dist[w] = dist[u] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

bool is_connected(const BaseGraph& graph) {
  if (graph.size() == 0) return true;
  const auto dist = bfs_distances(graph, 0);
  return std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; });
}

}  // namespace metroflow
