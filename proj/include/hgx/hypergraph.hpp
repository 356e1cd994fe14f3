#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hgx/linalg.hpp"

namespace hgx {

using NodeId = std::size_t;

struct BuildOptions {
  // Give every node that belongs to no hyperedge a unit-weight singleton
  // hyperedge {v} before validation.
  bool ensure_self_edges = false;
};

struct DegreeVectors {
  std::vector<double> node_degrees;       // d(v) = sum_e w(e) h(v, e)
  std::vector<std::size_t> edge_degrees;  // delta(e) = |e|
  double volume = 0.0;                    // sum_v d(v)
};

/// Validated, immutable hypergraph with binary incidence and positive
/// hyperedge weights. Every node has positive degree.
class Hypergraph {
 public:
  /// Throws DataError on: weight count mismatch, node id out of range, empty
  /// hyperedge, non-positive or non-finite weight, isolated node. Repeated
  /// node ids inside a hyperedge are collapsed; members are stored sorted.
  static Hypergraph build(std::size_t num_nodes, std::vector<std::vector<NodeId>> hyperedges,
                          std::optional<std::vector<double>> weights = std::nullopt,
                          BuildOptions options = {});

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }

  std::span<const NodeId> edge(std::size_t e) const { return edges_[e]; }
  const std::vector<std::vector<NodeId>>& edges() const { return edges_; }
  double edge_weight(std::size_t e) const { return weights_[e]; }
  std::span<const double> edge_weights() const { return weights_; }

  const DegreeVectors& degrees() const { return degrees_; }
  std::span<const double> node_degrees() const { return degrees_.node_degrees; }
  double volume() const { return degrees_.volume; }

  /// Binary incidence matrix H (num_nodes x num_edges).
  SparseMatrix incidence() const;

  /// Empty hypergraph (zero nodes); only build() yields a usable one.
  Hypergraph() = default;

 private:

  std::size_t num_nodes_ = 0;
  std::vector<std::vector<NodeId>> edges_;
  std::vector<double> weights_;
  DegreeVectors degrees_;
};

/// P = D_v^{-1/2} H W D_e^{-1} Hᵀ D_v^{-1/2}, assembled entrywise:
/// P(u, v) = sum over hyperedges e containing both u and v of
/// w(e) / (delta(e) sqrt(d(u) d(v))).
SparseMatrix propagation_matrix(const Hypergraph& g);

/// Normalized Laplacian I - P.
SparseMatrix laplacian(const Hypergraph& g);

/// Row-stochastic random-walk matrix D_v^{-1} H W D_e^{-1} Hᵀ.
SparseMatrix transition_matrix(const Hypergraph& g);

/// True iff the node/hyperedge bipartite graph is a single component.
bool is_connected(const Hypergraph& g);

/// Component id per node (ids assigned in order of first appearance).
std::vector<std::size_t> connected_components(const Hypergraph& g);

}  // namespace hgx
