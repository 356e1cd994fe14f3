#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "commands.hpp"
#include "hgx/data.hpp"
#include "hgx/errors.hpp"
#include "hgx/hypergraph.hpp"
#include "hgx/spectral.hpp"
#include "hgx/train.hpp"
#include "hgx/verify.hpp"

namespace py = pybind11;
using namespace hgx;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseMatrix to_dense(const Array& a) {
  if (a.ndim() == 1) return DenseMatrix(static_cast<std::size_t>(a.shape(0)), 1, std::vector<double>(a.data(), a.data() + a.size()));
  if (a.ndim() != 2) throw DimensionError("expected a 1-d or 2-d array");
  return DenseMatrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                     std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_numpy(const DenseMatrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

Array to_numpy(std::span<const double> v) {
  return Array({static_cast<py::ssize_t>(v.size())}, {static_cast<py::ssize_t>(sizeof(double))}, v.data());
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

ModelConfig make_config(const std::string& variant, std::size_t layers, std::size_t hidden, double alpha,
                        double lambda_id, double dropout, double lr, double weight_decay, std::size_t epochs,
                        std::size_t patience, std::uint64_t seed) {
  ModelConfig c;
  c.variant = parse_variant(variant);
  c.num_layers = layers;
  c.hidden_dim = hidden;
  c.alpha = alpha;
  c.lambda_id = lambda_id;
  c.dropout = dropout;
  c.learning_rate = lr;
  c.weight_decay = weight_decay;
  c.epochs = epochs;
  c.patience = patience;
  c.seed = seed;
  c.validate();
  return c;
}

#define HGX_CONFIG_ARGS                                                                                        \
  py::arg("variant") = "deep-hgcn", py::arg("layers") = 2, py::arg("hidden") = 32, py::arg("alpha") = 0.1,    \
      py::arg("lambda_id") = 0.5, py::arg("dropout") = 0.5, py::arg("lr") = 0.01,                              \
      py::arg("weight_decay") = 5e-4, py::arg("epochs") = 300, py::arg("patience") = 100, py::arg("seed") = 0

}  // namespace

PYBIND11_MODULE(_hgx, m) {
  m.doc() = "Hypergraph convolution toolkit";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DisconnectedError>(m, "DisconnectedError", PyExc_ValueError);

  py::class_<Hypergraph>(m, "Hypergraph")
      .def(py::init([](std::size_t n, std::vector<std::vector<NodeId>> edges,
                       std::optional<std::vector<double>> weights, bool self_edges) {
             return Hypergraph::build(n, std::move(edges), std::move(weights), BuildOptions{self_edges});
           }),
           py::arg("num_nodes"), py::arg("hyperedges"), py::arg("weights") = py::none(),
           py::arg("self_edges") = false)
      .def_property_readonly("num_nodes", &Hypergraph::num_nodes)
      .def_property_readonly("num_edges", &Hypergraph::num_edges)
      .def_property_readonly("hyperedges", &Hypergraph::edges)
      .def_property_readonly("node_degrees", [](const Hypergraph& g) { return to_numpy(g.node_degrees()); })
      .def_property_readonly("volume", &Hypergraph::volume)
      .def("incidence", [](const Hypergraph& g) { return to_numpy(g.incidence().to_dense()); })
      .def("propagation_matrix", [](const Hypergraph& g) { return to_numpy(propagation_matrix(g).to_dense()); })
      .def("laplacian", [](const Hypergraph& g) { return to_numpy(laplacian(g).to_dense()); })
      .def("transition_matrix", [](const Hypergraph& g) { return to_numpy(transition_matrix(g).to_dense()); })
      .def("is_connected", [](const Hypergraph& g) { return is_connected(g); })
      .def("connected_components", [](const Hypergraph& g) { return connected_components(g); });

  m.def("stationary_distribution_T", [](const Hypergraph& g) { return to_numpy(stationary_distribution_T(g)); });
  m.def("stationary_distribution_P", [](const Hypergraph& g) { return to_numpy(stationary_distribution_P(g)); });
  m.def("smoothing_limit", [](const Hypergraph& g, const Array& x) { return to_numpy(smoothing_limit(g, to_dense(x))); });
  m.def("power_smooth", [](const Hypergraph& g, const Array& x, std::size_t steps) {
    return to_numpy(power_smooth(propagation_matrix(g), to_dense(x), steps));
  });
  m.def("dirichlet_energy", [](const Hypergraph& g, const Array& x) {
    return dirichlet_energy(laplacian(g), to_dense(x));
  });
  m.def("dirichlet_energy_sum", [](const Hypergraph& g, const Array& x) { return dirichlet_energy_sum(g, to_dense(x)); });
  m.def("min_nonzero_eigenvalue", [](const Hypergraph& g) { return min_nonzero_eigenvalue(laplacian(g)); });

  m.def(
      "gamma_from_theta",
      [](std::vector<double> theta) {
        auto s = gamma_from_theta(PolynomialFilter(std::move(theta)));
        py::dict d;
        d["gamma"] = s.gamma;
        d["products"] = s.products;
        d["degenerate"] = s.degenerate;
        d["zero_pivot"] = s.zero_pivot;
        d["message"] = s.message;
        return d;
      },
      py::arg("theta"));
  m.def("theta_from_gamma", [](std::vector<double> gamma) {
    auto f = theta_from_gamma(gamma);
    return std::vector<double>(f.coefficients().begin(), f.coefficients().end());
  });

  py::class_<HyperDataset>(m, "Dataset")
      .def_readonly("graph", &HyperDataset::graph)
      .def_property_readonly("features", [](const HyperDataset& d) { return to_numpy(d.features); })
      .def_readonly("labels", &HyperDataset::labels)
      .def_readonly("num_classes", &HyperDataset::num_classes)
      .def_readonly("train_mask", &HyperDataset::train_mask)
      .def_readonly("val_mask", &HyperDataset::val_mask)
      .def_readonly("test_mask", &HyperDataset::test_mask)
      .def_readonly("meta", &HyperDataset::meta)
      .def_property_readonly("num_nodes", &HyperDataset::num_nodes)
      .def("to_json", [](const HyperDataset& d) { return dataset_to_string(d); })
      .def("save", [](const HyperDataset& d, const std::string& path) { save_dataset(d, path); });

  m.def(
      "load_dataset",
      [](const std::string& path, bool self_edges) { return load_dataset(path, LoadOptions{self_edges}); },
      py::arg("path"), py::arg("self_edges") = false);
  m.def(
      "generate_synthetic",
      [](std::size_t num_nodes, std::size_t num_classes, std::size_t num_hyperedges, double mean_edge_size,
         double homophily, std::size_t feature_dim, double separation, double noise, std::size_t train_per_class,
         std::size_t val_per_class, std::uint64_t seed) {
        SyntheticSpec s{num_nodes,   num_classes, num_hyperedges,  mean_edge_size, homophily, feature_dim,
                        separation, noise,       train_per_class, val_per_class,  seed};
        s.validate();
        return generate_synthetic(s);
      },
      py::arg("num_nodes") = 1000, py::arg("num_classes") = 4, py::arg("num_hyperedges") = 400,
      py::arg("mean_edge_size") = 5.0, py::arg("homophily") = 0.9, py::arg("feature_dim") = 16,
      py::arg("separation") = 2.0, py::arg("noise") = 1.0, py::arg("train_per_class") = 20,
      py::arg("val_per_class") = 20, py::arg("seed") = 0);

  m.def(
      "train",
      [](const HyperDataset& ds, const std::string& variant, std::size_t layers, std::size_t hidden, double alpha,
         double lambda_id, double dropout, double lr, double weight_decay, std::size_t epochs, std::size_t patience,
         std::uint64_t seed) {
        auto c = make_config(variant, layers, hidden, alpha, lambda_id, dropout, lr, weight_decay, epochs, patience,
                             seed);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(ds, c);
        }
        return json_to_py(r.report.to_json());
      },
      py::arg("dataset"), HGX_CONFIG_ARGS);

  m.def(
      "energy_probe",
      [](const HyperDataset& ds, const std::string& variant, std::size_t layers, std::size_t hidden, double alpha,
         double lambda_id, double dropout, double lr, double weight_decay, std::size_t epochs, std::size_t patience,
         std::uint64_t seed, double weight_norm) {
        auto c = make_config(variant, layers, hidden, alpha, lambda_id, dropout, lr, weight_decay, epochs, patience,
                             seed);
        auto params = init_params(c, ds.feature_dim(), ds.num_classes, Rng(seed).stream("init"));
        if (weight_norm > 0) rescale_layer_weights(params, weight_norm);
        auto t = energy_probe(params, ds, c);
        py::dict d;
        d["layers"] = t.layers;
        d["energies"] = t.energies;
        d["distances"] = t.distances;
        return d;
      },
      py::arg("dataset"), HGX_CONFIG_ARGS, py::arg("weight_norm") = 0.0);

  m.def(
      "verify",
      [](std::size_t trials, std::uint64_t seed, std::size_t max_nodes, bool corrupt_delta) {
        VerifyOptions o{trials, seed, max_nodes, corrupt_delta};
        VerifyReport r;
        {
          py::gil_scoped_release release;
          r = run_verification(o);
        }
        return json_to_py(r.to_json());
      },
      py::arg("trials") = 100, py::arg("seed") = 0, py::arg("max_nodes") = 50, py::arg("corrupt_delta") = false);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        std::vector<const char*> argv{"hgx"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a subcommand in-process; returns (exit_code, stdout, stderr).");
}
