#include "lidcd/graph.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace lidcd {

int CausalGraph::edge_count() const {
  int n = 0;
  for (std::uint8_t v : adj) n += v;
  return n;
}

std::vector<int> CausalGraph::parents(int j) const {
  std::vector<int> out;
  for (int i = 0; i < d; ++i)
    if (edge(i, j)) out.push_back(i);
  return out;
}

bool CausalGraph::is_acyclic() const {
  try {
    topological_order();
    return true;
  } catch (const std::runtime_error&) {
    return false;
  }
}

std::vector<int> CausalGraph::topological_order() const {
  std::vector<int> indeg(static_cast<std::size_t>(d), 0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (edge(i, j)) ++indeg[static_cast<std::size_t>(j)];
  std::vector<int> queue, order;
  for (int j = 0; j < d; ++j)
    if (indeg[static_cast<std::size_t>(j)] == 0) queue.push_back(j);
  while (!queue.empty()) {
    const int u = queue.back();
    queue.pop_back();
    order.push_back(u);
    for (int j = 0; j < d; ++j) {
      if (edge(u, j) && --indeg[static_cast<std::size_t>(j)] == 0) queue.push_back(j);
    }
  }
  if (static_cast<int>(order.size()) != d)
    throw std::runtime_error("topological_order: graph contains a cycle");
  return order;
}

CausalGraph generate_graph_with_edge_prob(int d, double edge_prob, RngStream& rng) {
  if (d < 2) throw std::invalid_argument("generate_graph: d must be >= 2");
  if (edge_prob < 0.0 || edge_prob > 1.0)
    throw std::invalid_argument("generate_graph: edge probability outside [0, 1]");
  CausalGraph ordered(d);
  for (int j = 1; j < d; ++j)
    for (int i = 0; i < j; ++i)
      if (rng.bernoulli(edge_prob)) ordered.set_edge(i, j, true);

  // Random relabeling P: node i becomes perm[i].
  std::vector<int> perm(static_cast<std::size_t>(d));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = d - 1; i > 0; --i) {
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)]);
  }
  CausalGraph g(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (ordered.edge(i, j))
        g.set_edge(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)], true);
  return g;
}

CausalGraph generate_graph(int d, double edges_per_node, RngStream& rng) {
  if (d < 2) throw std::invalid_argument("generate_graph: d must be >= 2");
  if (!(edges_per_node > 0.0) || edges_per_node > (d - 1) / 2.0)
    throw std::invalid_argument("generate_graph: e must satisfy 0 < e <= (d-1)/2");
  return generate_graph_with_edge_prob(d, 2.0 * edges_per_node / (d - 1), rng);
}

}  // namespace lidcd
