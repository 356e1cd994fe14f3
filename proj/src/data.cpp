#include "hgx/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hgx/errors.hpp"
#include "hgx/format.hpp"
#include "hgx/rng.hpp"

namespace hgx {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw DataError(path + ": " + what); }

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) fail(key, "missing required field");
  return *it;
}

std::size_t as_count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    fail(path, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "non-finite value");
  return x;
}

const json& as_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  return v;
}

std::vector<std::size_t> parse_mask(const json& doc, const char* key, std::size_t n) {
  std::vector<std::size_t> out;
  const json& arr = as_array(doc.at(key), key);
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    std::string path = std::string(key) + "[" + std::to_string(i) + "]";
    std::size_t v = as_count(arr[i], path);
    if (v >= n) fail(path, "node " + std::to_string(v) + " out of range for " + std::to_string(n) + " nodes");
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) fail(key, "repeated node id");
  return out;
}

DenseMatrix parse_features(const json& f, std::size_t n) {
  if (!f.is_object() || f.size() != 1) fail("features", "expected an object with exactly one of 'dense' or 'sparse'");
  if (auto it = f.find("dense"); it != f.end()) {
    const json& rows = as_array(*it, "features.dense");
    if (rows.size() != n) {
      fail("features.dense", std::to_string(rows.size()) + " rows for " + std::to_string(n) + " nodes");
    }
    std::size_t d = n > 0 ? as_array(rows[0], "features.dense[0]").size() : 0;
    DenseMatrix x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::string rp = "features.dense[" + std::to_string(i) + "]";
      const json& row = as_array(rows[i], rp);
      if (row.size() != d) fail(rp, "row length " + std::to_string(row.size()) + " differs from " + std::to_string(d));
      for (std::size_t j = 0; j < d; ++j) x(i, j) = as_real(row[j], rp + "[" + std::to_string(j) + "]");
    }
    return x;
  }
  if (auto it = f.find("sparse"); it != f.end()) {
    const json& sp = *it;
    if (!sp.is_object()) fail("features.sparse", "expected an object");
    std::size_t d = as_count(require(sp, "dim"), "features.sparse.dim");
    const json& rows = as_array(require(sp, "rows"), "features.sparse.rows");
    if (rows.size() != n) {
      fail("features.sparse.rows", std::to_string(rows.size()) + " rows for " + std::to_string(n) + " nodes");
    }
    DenseMatrix x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::string rp = "features.sparse.rows[" + std::to_string(i) + "]";
      if (!rows[i].is_object()) fail(rp, "expected an object with 'idx' and 'val'");
      const json& idx = as_array(require(rows[i], "idx"), rp + ".idx");
      const json& val = as_array(require(rows[i], "val"), rp + ".val");
      if (idx.size() != val.size()) fail(rp, "'idx' and 'val' lengths differ");
      for (std::size_t k = 0; k < idx.size(); ++k) {
        std::size_t j = as_count(idx[k], rp + ".idx[" + std::to_string(k) + "]");
        if (j >= d) fail(rp + ".idx[" + std::to_string(k) + "]", "column " + std::to_string(j) + " >= dim");
        x(i, j) += as_real(val[k], rp + ".val[" + std::to_string(k) + "]");
      }
    }
    return x;
  }
  fail("features", "expected 'dense' or 'sparse'");
}

void check_disjoint(const std::vector<std::size_t>& a, const char* an, const std::vector<std::size_t>& b,
                    const char* bn) {
  std::vector<std::size_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  if (!common.empty()) {
    throw DataError(std::string(an) + " and " + bn + " overlap (" + std::to_string(common.size()) +
                    " shared nodes, first " + std::to_string(common.front()) + ")");
  }
}

}  // namespace

void HyperDataset::validate() const {
  const std::size_t n = graph.num_nodes();
  if (n == 0) throw DataError("num_nodes: must be positive");
  if (num_classes == 0) throw DataError("num_classes: must be positive");
  if (features.rows() != n) {
    throw DataError("features: " + std::to_string(features.rows()) + " rows for " + std::to_string(n) + " nodes");
  }
  for (double v : features.values()) {
    if (!std::isfinite(v)) throw DataError("features: non-finite value");
  }
  if (labels.size() != n) {
    throw DataError("labels: " + std::to_string(labels.size()) + " entries for " + std::to_string(n) + " nodes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw DataError("labels[" + std::to_string(i) + "]: " + std::to_string(labels[i]) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
  }
  auto check_mask = [&](const std::vector<std::size_t>& m, const char* name) {
    if (!std::is_sorted(m.begin(), m.end()) || std::adjacent_find(m.begin(), m.end()) != m.end()) {
      throw DataError(std::string(name) + ": must be sorted without repeats");
    }
    if (!m.empty() && m.back() >= n) throw DataError(std::string(name) + ": node id out of range");
  };
  check_mask(train_mask, "train_mask");
  check_mask(test_mask, "test_mask");
  check_mask(val_mask, "val_mask");
  check_disjoint(train_mask, "train_mask", test_mask, "test_mask");
  check_disjoint(train_mask, "train_mask", val_mask, "val_mask");
  check_disjoint(val_mask, "val_mask", test_mask, "test_mask");
}

HyperDataset dataset_from_json(const json& doc, LoadOptions options) {
  if (!doc.is_object()) fail("$", "expected a JSON object");
  static const char* known[] = {"num_nodes", "num_classes", "hyperedges", "edge_weights", "features",
                                "labels",    "train_mask",  "test_mask",  "val_mask",     "meta"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known)) {
      fail(key, "unknown field");
    }
  }

  HyperDataset ds;
  const std::size_t n = as_count(require(doc, "num_nodes"), "num_nodes");
  if (n == 0) fail("num_nodes", "must be positive");
  ds.num_classes = as_count(require(doc, "num_classes"), "num_classes");
  if (ds.num_classes == 0) fail("num_classes", "must be positive");

  const json& edges_json = as_array(require(doc, "hyperedges"), "hyperedges");
  std::vector<std::vector<NodeId>> edges(edges_json.size());
  for (std::size_t e = 0; e < edges_json.size(); ++e) {
    std::string ep = "hyperedges[" + std::to_string(e) + "]";
    const json& members = as_array(edges_json[e], ep);
    edges[e].reserve(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      const std::string kp = ep + "[" + std::to_string(k) + "]";
      const std::size_t v = as_count(members[k], kp);
      if (v >= n) fail(kp, "node " + std::to_string(v) + " out of range for num_nodes " + std::to_string(n));
      edges[e].push_back(v);
    }
  }
  std::optional<std::vector<double>> weights;
  if (auto it = doc.find("edge_weights"); it != doc.end()) {
    const json& w = as_array(*it, "edge_weights");
    weights.emplace();
    for (std::size_t e = 0; e < w.size(); ++e) weights->push_back(as_real(w[e], "edge_weights[" + std::to_string(e) + "]"));
  }
  ds.graph = Hypergraph::build(n, std::move(edges), std::move(weights), BuildOptions{options.ensure_self_edges});

  ds.features = parse_features(require(doc, "features"), n);

  const json& labels = as_array(require(doc, "labels"), "labels");
  if (labels.size() != n) fail("labels", std::to_string(labels.size()) + " entries for " + std::to_string(n) + " nodes");
  ds.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = as_count(labels[i], "labels[" + std::to_string(i) + "]");
    if (c >= ds.num_classes) {
      fail("labels[" + std::to_string(i) + "]", std::to_string(c) + " outside [0, " + std::to_string(ds.num_classes) + ")");
    }
    ds.labels.push_back(static_cast<int>(c));
  }

  require(doc, "train_mask");
  require(doc, "test_mask");
  ds.train_mask = parse_mask(doc, "train_mask", n);
  ds.test_mask = parse_mask(doc, "test_mask", n);
  if (doc.contains("val_mask")) ds.val_mask = parse_mask(doc, "val_mask", n);

  if (auto it = doc.find("meta"); it != doc.end()) {
    if (!it->is_object()) fail("meta", "expected an object of strings");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_string()) fail("meta." + key, "expected a string");
      ds.meta[key] = value.get<std::string>();
    }
  }

  ds.validate();
  return ds;
}

json dataset_to_json(const HyperDataset& ds) {
  ds.validate();
  json doc = json::object();
  doc["num_nodes"] = ds.num_nodes();
  doc["num_classes"] = ds.num_classes;
  json edges = json::array();
  for (const auto& e : ds.graph.edges()) edges.push_back(e);
  doc["hyperedges"] = std::move(edges);
  auto w = ds.graph.edge_weights();
  if (std::any_of(w.begin(), w.end(), [](double x) { return x != 1.0; })) {
    doc["edge_weights"] = std::vector<double>(w.begin(), w.end());
  }
  json rows = json::array();
  for (std::size_t i = 0; i < ds.features.rows(); ++i) {
    auto r = ds.features.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  doc["features"] = {{"dense", std::move(rows)}};
  doc["labels"] = ds.labels;
  doc["train_mask"] = ds.train_mask;
  doc["test_mask"] = ds.test_mask;
  if (ds.has_val()) doc["val_mask"] = ds.val_mask;
  doc["meta"] = json(ds.meta);
  return doc;
}

HyperDataset load_dataset(const std::string& path, LoadOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open dataset file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": malformed JSON (" + e.what() + ")");
  }
  return dataset_from_json(doc, options);
}

std::string dataset_to_string(const HyperDataset& ds) {
  // nlohmann::json keeps object keys sorted and prints doubles with the
  // shortest representation that round-trips.
  return dataset_to_json(ds).dump() + "\n";
}

void save_dataset(const HyperDataset& ds, const std::string& path) {
  std::string text = dataset_to_string(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << text;
  if (!out.flush()) throw DataError(path + ": write failed");
}

// ---------------------------------------------------------------------------

void SyntheticSpec::validate() const {
  auto bad = [](const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); };
  if (num_nodes == 0) bad("num_nodes", "must be positive");
  if (num_classes == 0) bad("num_classes", "must be positive");
  if (num_classes > num_nodes) bad("num_classes", "exceeds num_nodes");
  if (num_hyperedges == 0) bad("num_hyperedges", "must be positive");
  if (!(mean_edge_size >= 2.0) || !std::isfinite(mean_edge_size)) bad("mean_edge_size", "must be >= 2");
  if (!(homophily >= 0.0 && homophily <= 1.0)) bad("homophily", "must lie in [0, 1]");
  if (feature_dim < num_classes) bad("feature_dim", "must be at least num_classes");
  if (!(separation >= 0.0) || !std::isfinite(separation)) bad("separation", "must be finite and >= 0");
  if (!(noise >= 0.0) || !std::isfinite(noise)) bad("noise", "must be finite and >= 0");
  std::size_t smallest = num_nodes / num_classes;
  if (train_per_class + val_per_class >= smallest) {
    bad("train_per_class", "train_per_class + val_per_class must leave test nodes in every class (class size " +
                               std::to_string(smallest) + ")");
  }
  if (train_per_class == 0) bad("train_per_class", "must be positive");
}

HyperDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.num_nodes;
  const std::size_t classes = spec.num_classes;
  const Rng root(spec.seed);

  // Balanced labels, randomly placed.
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes);
  Rng label_rng = root.stream("labels");
  label_rng.shuffle(labels);
  std::vector<std::vector<NodeId>> members(classes);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

  // Hyperedges, each tagged with its class (-1 for mixed).
  Rng edge_rng = root.stream("hyperedges");
  const auto hi = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(2.0 * spec.mean_edge_size - 2.0)));
  std::vector<std::vector<NodeId>> edges(spec.num_hyperedges);
  std::vector<int> tag(spec.num_hyperedges, -1);
  for (std::size_t e = 0; e < spec.num_hyperedges; ++e) {
    std::size_t size = 2 + static_cast<std::size_t>(edge_rng.below(hi - 1));
    if (edge_rng.bernoulli(spec.homophily)) {
      std::size_t k = edge_rng.below(classes);
      const auto& pool = members[k];
      for (std::size_t idx : edge_rng.sample_without_replacement(pool.size(), std::min(size, pool.size()))) {
        edges[e].push_back(pool[idx]);
      }
      tag[e] = static_cast<int>(k);
    } else {
      edges[e] = edge_rng.sample_without_replacement(n, std::min(size, n));
    }
    std::sort(edges[e].begin(), edges[e].end());
  }

  // Uncovered nodes join a random hyperedge of their own class (any
  // hyperedge when their class has none), keeping the edge count fixed.
  std::vector<std::vector<std::size_t>> edges_of_class(classes);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (tag[e] >= 0) edges_of_class[static_cast<std::size_t>(tag[e])].push_back(e);
  }
  std::vector<char> covered(n, 0);
  for (const auto& e : edges) {
    for (NodeId v : e) covered[v] = 1;
  }
  Rng attach_rng = root.stream("attach");
  std::size_t attached = 0;
  for (NodeId v = 0; v < n; ++v) {
    if (covered[v]) continue;
    const auto& own = edges_of_class[static_cast<std::size_t>(labels[v])];
    std::size_t e = own.empty() ? attach_rng.below(edges.size()) : own[attach_rng.below(own.size())];
    edges[e].push_back(v);
    covered[v] = 1;
    ++attached;
  }

  // Join stray components to the largest one through one representative each.
  std::size_t bridged = 0;
  {
    Hypergraph probe = Hypergraph::build(n, edges);
    std::vector<std::size_t> comp = connected_components(probe);
    std::size_t num_comp = 1 + *std::max_element(comp.begin(), comp.end());
    if (num_comp > 1) {
      std::vector<std::size_t> sizes(num_comp, 0);
      std::vector<NodeId> representative(num_comp, n);
      for (NodeId v = 0; v < n; ++v) {
        ++sizes[comp[v]];
        if (representative[comp[v]] == n) representative[comp[v]] = v;
      }
      std::size_t giant = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      std::vector<std::size_t> giant_edges;
      for (std::size_t e = 0; e < edges.size(); ++e) {
        if (comp[edges[e].front()] == giant) giant_edges.push_back(e);
      }
      Rng bridge_rng = root.stream("bridge");
      for (std::size_t c = 0; c < num_comp; ++c) {
        if (c == giant) continue;
        NodeId r = representative[c];
        std::vector<std::size_t> same;
        for (std::size_t e : giant_edges) {
          if (tag[e] == labels[r]) same.push_back(e);
        }
        const auto& pool = same.empty() ? giant_edges : same;
        edges[pool[bridge_rng.below(pool.size())]].push_back(r);
        ++bridged;
      }
    }
  }

  HyperDataset ds;
  ds.graph = Hypergraph::build(n, std::move(edges));
  ds.num_classes = classes;
  ds.labels = std::move(labels);

  // Features: class center plus isotropic Gaussian noise.
  const double center = spec.separation / std::sqrt(2.0);
  ds.features = DenseMatrix(n, spec.feature_dim);
  Rng feat_rng = root.stream("features");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < spec.feature_dim; ++j) {
      double mean = (j == static_cast<std::size_t>(ds.labels[i])) ? center : 0.0;
      ds.features(i, j) = mean + spec.noise * feat_rng.normal();
    }
  }

  // Stratified split: per class, a shuffled prefix is train, then val, rest test.
  Rng split_rng = root.stream("split");
  for (std::size_t k = 0; k < classes; ++k) {
    std::vector<NodeId> pool = members[k];
    split_rng.shuffle(pool);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (i < spec.train_per_class) {
        ds.train_mask.push_back(pool[i]);
      } else if (i < spec.train_per_class + spec.val_per_class) {
        ds.val_mask.push_back(pool[i]);
      } else {
        ds.test_mask.push_back(pool[i]);
      }
    }
  }
  std::sort(ds.train_mask.begin(), ds.train_mask.end());
  std::sort(ds.val_mask.begin(), ds.val_mask.end());
  std::sort(ds.test_mask.begin(), ds.test_mask.end());

  ds.meta = {
      {"generator", "planted-partition"},
      {"num_hyperedges", std::to_string(spec.num_hyperedges)},
      {"mean_edge_size", format_double(spec.mean_edge_size)},
      {"homophily", format_double(spec.homophily)},
      {"separation", format_double(spec.separation)},
      {"noise", format_double(spec.noise)},
      {"seed", std::to_string(spec.seed)},
      {"attached_isolated", std::to_string(attached)},
      {"bridged_components", std::to_string(bridged)},
  };
  ds.validate();
  return ds;
}

}  // namespace hgx
