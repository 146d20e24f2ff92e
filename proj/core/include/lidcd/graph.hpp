#pragma once

#include <cstdint>
#include <vector>

#include "lidcd/rng.hpp"

namespace lidcd {

// Directed graph over d variables; adj[i*d+j] == 1 means edge x_i -> x_j.
struct CausalGraph {
  int d = 0;
  std::vector<std::uint8_t> adj;

  CausalGraph() = default;
  explicit CausalGraph(int d_) : d(d_), adj(static_cast<std::size_t>(d_) * d_, 0) {}

  bool edge(int i, int j) const { return adj[static_cast<std::size_t>(i) * d + j] != 0; }
  void set_edge(int i, int j, bool on) { adj[static_cast<std::size_t>(i) * d + j] = on ? 1 : 0; }
  int edge_count() const;
  std::vector<int> parents(int j) const;

  bool is_acyclic() const;
  // Topological order (Kahn); throws std::runtime_error when cyclic.
  std::vector<int> topological_order() const;
};

// Sequential Erdos-Renyi DAG sampler: visit nodes in order, connect each
// already-visited node to the current one with probability edge_prob, then
// relabel with a uniformly random permutation so the output ordering carries
// no information about the topological order.
CausalGraph generate_graph_with_edge_prob(int d, double edge_prob, RngStream& rng);

// Expected-edges-per-node parameterization; slot probability p = 2e/(d-1).
// Requires d >= 2 and 0 < e <= (d-1)/2.
CausalGraph generate_graph(int d, double edges_per_node, RngStream& rng);

}  // namespace lidcd
