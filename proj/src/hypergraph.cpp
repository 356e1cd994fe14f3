#include "hgx/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "hgx/errors.hpp"

namespace hgx {

Hypergraph Hypergraph::build(std::size_t num_nodes, std::vector<std::vector<NodeId>> hyperedges,
                             std::optional<std::vector<double>> weights, BuildOptions options) {
  if (num_nodes == 0) throw DataError("hypergraph: num_nodes must be positive");
  if (weights && weights->size() != hyperedges.size()) {
    throw DataError("hypergraph: " + std::to_string(weights->size()) + " edge weights for " +
                    std::to_string(hyperedges.size()) + " hyperedges");
  }
  std::vector<double> w = weights ? std::move(*weights) : std::vector<double>(hyperedges.size(), 1.0);

  for (std::size_t e = 0; e < hyperedges.size(); ++e) {
    auto& members = hyperedges[e];
    if (members.empty()) throw DataError("hypergraph: hyperedge " + std::to_string(e) + " is empty");
    for (NodeId v : members) {
      if (v >= num_nodes) {
        throw DataError("hypergraph: hyperedge " + std::to_string(e) + " references node " + std::to_string(v) +
                        " but num_nodes is " + std::to_string(num_nodes));
      }
    }
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (!(w[e] > 0.0) || !std::isfinite(w[e])) {
      throw DataError("hypergraph: hyperedge " + std::to_string(e) + " has non-positive weight");
    }
  }

  if (options.ensure_self_edges) {
    std::vector<bool> covered(num_nodes, false);
    for (const auto& members : hyperedges) {
      for (NodeId v : members) covered[v] = true;
    }
    for (NodeId v = 0; v < num_nodes; ++v) {
      if (!covered[v]) {
        hyperedges.push_back({v});
        w.push_back(1.0);
      }
    }
  }

  Hypergraph g;
  g.num_nodes_ = num_nodes;
  g.degrees_.node_degrees.assign(num_nodes, 0.0);
  g.degrees_.edge_degrees.reserve(hyperedges.size());
  for (std::size_t e = 0; e < hyperedges.size(); ++e) {
    for (NodeId v : hyperedges[e]) g.degrees_.node_degrees[v] += w[e];
    g.degrees_.edge_degrees.push_back(hyperedges[e].size());
  }
  for (NodeId v = 0; v < num_nodes; ++v) {
    if (g.degrees_.node_degrees[v] <= 0.0) {
      throw DataError("hypergraph: node " + std::to_string(v) + " is isolated (belongs to no hyperedge)");
    }
  }
  double vol = 0.0;
  for (double d : g.degrees_.node_degrees) vol += d;
  g.degrees_.volume = vol;
  g.edges_ = std::move(hyperedges);
  g.weights_ = std::move(w);
  return g;
}

SparseMatrix Hypergraph::incidence() const {
  std::vector<Triplet> t;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    for (NodeId v : edges_[e]) t.push_back({v, e, 1.0});
  }
  return SparseMatrix::from_triplets(num_nodes_, edges_.size(), std::move(t));
}

namespace {

// Shared assembly of H W D_e^{-1} Hᵀ with per-endpoint scaling:
// entry(u, v) = sum_e w(e)/delta(e) * left[u] * right[v].
SparseMatrix clique_expansion(const Hypergraph& g, std::span<const double> left, std::span<const double> right) {
  std::vector<Triplet> t;
  std::size_t total = 0;
  for (const auto& members : g.edges()) total += members.size() * members.size();
  t.reserve(total);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto members = g.edge(e);
    const double scale = g.edge_weight(e) / static_cast<double>(members.size());
    for (NodeId u : members) {
      for (NodeId v : members) t.push_back({u, v, scale * (left[u] * right[v])});
    }
  }
  return SparseMatrix::from_triplets(g.num_nodes(), g.num_nodes(), std::move(t));
}

}  // namespace

SparseMatrix propagation_matrix(const Hypergraph& g) {
  std::vector<double> inv_sqrt(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) inv_sqrt[v] = 1.0 / std::sqrt(g.node_degrees()[v]);
  return clique_expansion(g, inv_sqrt, inv_sqrt);
}

SparseMatrix laplacian(const Hypergraph& g) {
  return SparseMatrix::identity(g.num_nodes()).added(propagation_matrix(g), -1.0);
}

SparseMatrix transition_matrix(const Hypergraph& g) {
  std::vector<double> inv(g.num_nodes());
  const std::vector<double> ones(g.num_nodes(), 1.0);
  for (NodeId v = 0; v < g.num_nodes(); ++v) inv[v] = 1.0 / g.node_degrees()[v];
  return clique_expansion(g, inv, ones);
}

std::vector<std::size_t> connected_components(const Hypergraph& g) {
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<std::size_t>> node_edges(n);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    for (NodeId v : g.edge(e)) node_edges[v].push_back(e);
  }
  std::vector<std::size_t> comp(n, kUnset);
  std::vector<bool> edge_seen(g.num_edges(), false);
  std::size_t next = 0;
  std::deque<NodeId> queue;
  for (NodeId s = 0; s < n; ++s) {
    if (comp[s] != kUnset) continue;
    comp[s] = next;
    queue.push_back(s);
    while (!queue.empty()) {
      const NodeId u = queue.front();
      queue.pop_front();
      for (std::size_t e : node_edges[u]) {
        if (edge_seen[e]) continue;
        edge_seen[e] = true;
        for (NodeId v : g.edge(e)) {
          if (comp[v] == kUnset) {
            comp[v] = next;
            queue.push_back(v);
          }
        }
      }
    }
    ++next;
  }
  return comp;
}

bool is_connected(const Hypergraph& g) {
  const auto comp = connected_components(g);
  return std::all_of(comp.begin(), comp.end(), [](std::size_t c) { return c == 0; });
}

}  // namespace hgx
