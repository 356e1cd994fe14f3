#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgx/hypergraph.hpp"
#include "hgx/rng.hpp"

namespace hgx {

/// Random connected hypergraph with num_nodes nodes. Hyperedge count is
/// uniform in [n, 2n], sizes uniform in [2, min(n, max_edge_size)], weights
/// uniform in [0.5, 2]. Nodes left uncovered get their own pair edge and
/// stray components are joined to component 0 by extra pair edges.
Hypergraph random_connected_hypergraph(Rng& rng, std::size_t num_nodes, std::size_t max_edge_size = 6);

struct VerifyOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t max_nodes = 50;
  // Negative control: perturbs the Laplacian handed to the energy checks.
  bool corrupt_delta = false;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::size_t trials = 0;
  double worst = 0.0;      // largest observed value of the checked quantity
  double tolerance = 0.0;  // threshold `worst` is compared against
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  /// One line per check: `PASS name  worst=... tol=... (detail)`.
  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Runs the seven checks: lemma1, theorem1, lemma2, theorem2, corollary2.1,
/// theorem3, dual-energy. Every trial draws its own Rng stream from `seed`.
VerifyReport run_verification(const VerifyOptions& options);

}  // namespace hgx
