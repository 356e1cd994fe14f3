#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgx/hypergraph.hpp"
#include "hgx/linalg.hpp"

namespace hgx {

/// Node-classification dataset over a hypergraph. Masks are sorted node-id
/// lists; train, val and test are pairwise disjoint.
struct HyperDataset {
  Hypergraph graph;
  DenseMatrix features;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::vector<std::size_t> train_mask;
  std::vector<std::size_t> test_mask;
  std::vector<std::size_t> val_mask;  // empty when absent
  std::map<std::string, std::string> meta;

  std::size_t num_nodes() const { return graph.num_nodes(); }
  std::size_t feature_dim() const { return features.cols(); }
  bool has_val() const { return !val_mask.empty(); }

  /// Throws DataError naming the offending field.
  void validate() const;
};

struct LoadOptions {
  bool ensure_self_edges = false;
};

/// Parses the canonical JSON document. Sparse feature rows are expanded to
/// dense. Throws DataError with the JSON path of the first problem.
HyperDataset dataset_from_json(const nlohmann::json& doc, LoadOptions options = {});
nlohmann::json dataset_to_json(const HyperDataset& ds);

HyperDataset load_dataset(const std::string& path, LoadOptions options = {});

/// Canonical text: sorted keys, compact separators, shortest round-trip
/// doubles, trailing newline. Features are always written dense.
std::string dataset_to_string(const HyperDataset& ds);
void save_dataset(const HyperDataset& ds, const std::string& path);

// ---------------------------------------------------------------------------

/// Planted-partition generator parameters.
struct SyntheticSpec {
  std::size_t num_nodes = 1000;
  std::size_t num_classes = 4;
  std::size_t num_hyperedges = 400;
  double mean_edge_size = 5.0;
  double homophily = 0.9;  // probability a hyperedge is drawn inside one class
  std::size_t feature_dim = 16;
  double separation = 2.0;  // distance between class centers
  double noise = 1.0;       // per-coordinate Gaussian standard deviation
  std::size_t train_per_class = 20;
  std::size_t val_per_class = 20;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

/// Hyperedge sizes are uniform on [2, 2*mean - 2] (size 2 when mean <= 2).
/// With probability `homophily` all members come from one uniformly chosen
/// class, otherwise from the whole node set. Features are class center plus
/// N(0, noise^2) per coordinate; centers are scaled unit vectors e_k so that
/// any two are `separation` apart. Components left disconnected after
/// sampling are joined by adding one member of each stray component to a
/// hyperedge of the largest component (same-class hyperedge when one
/// exists); the count is stored in meta["bridged_components"]. Node, edge and
/// class counts match the SyntheticSpec exactly.
HyperDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace hgx
