#include "commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hgx/data.hpp"
#include "hgx/errors.hpp"
#include "hgx/format.hpp"
#include "hgx/nn.hpp"
#include "hgx/spectral.hpp"
#include "hgx/train.hpp"
#include "hgx/verify.hpp"

namespace hgx::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ModelFlags {
  std::string variant = "deep-hgcn";
  std::size_t layers = 2;
  std::size_t hidden = 32;
  double alpha = 0.1;
  double lambda_id = 0.5;
  double dropout = 0.5;
  double lr = 0.01;
  double weight_decay = 5e-4;
  std::size_t epochs = 300;
  std::size_t patience = 100;
  int precision = 64;
  std::string activation = "relu";
  double leaky_slope = 0.01;
};

struct Common {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON file with default values for any of these flags");
  app->add_option("--out-dir", c.out_dir, "Output directory (default ./runs/<timestamp>-<seed>/)");
  app->add_option("--seed", c.seed, "Random seed");
}

void add_model_flags(CLI::App* app, ModelFlags& f) {
  app->add_option("--variant", f.variant, "deep-hgcn | hgnn | shgcn | mlp");
  app->add_option("--layers", f.layers, "Number of propagation layers K");
  app->add_option("--hidden", f.hidden, "Hidden dimension");
  app->add_option("--alpha", f.alpha, "Initial-residual strength");
  app->add_option("--lambda-id", f.lambda_id, "Identity-mapping parameter lambda");
  app->add_option("--dropout", f.dropout, "Dropout rate");
  app->add_option("--lr", f.lr, "Adam learning rate");
  app->add_option("--weight-decay", f.weight_decay, "L2 coefficient on all weights");
  app->add_option("--epochs", f.epochs, "Maximum training epochs");
  app->add_option("--patience", f.patience, "Early-stopping patience");
  app->add_option("--precision", f.precision, "32 or 64 (HGX_PRECISION overrides)");
  app->add_option("--activation", f.activation, "relu | leaky-relu");
  app->add_option("--leaky-slope", f.leaky_slope, "Negative slope for leaky-relu");
}

Precision parse_precision(int bits, const char* source) {
  if (bits == 32) return Precision::f32;
  if (bits == 64) return Precision::f64;
  throw ConfigError(std::string(source) + ": precision must be 32 or 64, got " + std::to_string(bits));
}

ModelConfig to_config(const ModelFlags& f, std::uint64_t seed) {
  ModelConfig c;
  c.variant = parse_variant(f.variant);
  c.num_layers = f.layers;
  c.hidden_dim = f.hidden;
  c.alpha = f.alpha;
  c.lambda_id = f.lambda_id;
  c.dropout = f.dropout;
  c.learning_rate = f.lr;
  c.weight_decay = f.weight_decay;
  c.epochs = f.epochs;
  c.patience = f.patience;
  c.seed = seed;
  c.precision = parse_precision(f.precision, "precision");
  if (const char* env = std::getenv("HGX_PRECISION"); env != nullptr && *env != '\0') {
    std::string v(env);
    if (v != "32" && v != "64") throw ConfigError("HGX_PRECISION: must be 32 or 64, got '" + v + "'");
    c.precision = parse_precision(std::stoi(v), "HGX_PRECISION");
  }
  if (f.activation == "relu") {
    c.activation = Activation::relu();
  } else if (f.activation == "leaky-relu") {
    c.activation = Activation::leaky_relu(f.leaky_slope);
  } else {
    throw ConfigError("activation: expected relu or leaky-relu, got '" + f.activation + "'");
  }
  c.validate();
  return c;
}

std::string default_out_dir(std::uint64_t seed) {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return (fs::path("runs") / (std::string(buf) + "-" + std::to_string(seed))).string();
}

fs::path prepare_out_dir(const Common& c) {
  fs::path dir = c.out_dir.empty() ? fs::path(default_out_dir(c.seed)) : fs::path(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) throw std::runtime_error("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string pct(double acc) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << 100.0 * acc;
  return os.str();
}

// Turns the `--config` JSON into extra argv tokens for every key whose flag
// was not given explicitly, so command-line values take precedence.
std::vector<std::string> merge_config(std::vector<std::string> args, CLI::App& app) {
  if (args.size() < 2) return args;
  CLI::App* sub = nullptr;
  for (CLI::App* s : app.get_subcommands({})) {
    if (s->get_name() == args[1]) sub = s;
  }
  if (sub == nullptr) return args;

  std::string config_path;
  auto given = [&](const std::string& flag) {
    for (std::size_t i = 2; i < args.size(); ++i) {
      if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw ConfigError("config: cannot open " + config_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: malformed JSON in " + config_path + " (" + e.what() + ")");
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");

  for (const auto& [key, value] : doc.items()) {
    const std::string flag = "--" + key;
    CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr || key == "config" || key == "help") {
      throw ConfigError("config: unknown key '" + key + "' for " + sub->get_name());
    }
    if (given(flag)) continue;
    if (value.is_boolean()) {
      if (opt->get_type_size() != 0) {
        throw ConfigError("config: '" + key + "' does not take a boolean");
      }
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_number()) throw ConfigError("config: '" + key + "' must be a list of numbers");
        joined += (i ? "," : "") + value[i].dump();
      }
      args.push_back(flag);
      args.push_back(joined);
    } else if (value.is_string()) {
      args.push_back(flag);
      args.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      args.push_back(flag);
      args.push_back(value.dump());
    } else {
      throw ConfigError("config: unsupported value for '" + key + "'");
    }
  }
  return args;
}

// ---------------------------------------------------------------------------

struct TrainCmd {
  Common common;
  ModelFlags model;
  std::string dataset;
  bool self_edges = false;
  bool record_timing = false;
};

int cmd_train(const TrainCmd& a, std::ostream& out) {
  const ModelConfig config = to_config(a.model, a.common.seed);
  HyperDataset ds = load_dataset(a.dataset, LoadOptions{a.self_edges});
  auto result = train(ds, config);
  const fs::path dir = prepare_out_dir(a.common);
  json report = result.report.to_json(a.record_timing);
  report["dataset"] = fs::path(a.dataset).filename().string();
  write_json(dir / "train_report.json", report);
  save_checkpoint((dir / "model.ckpt").string(),
                  Checkpoint{config.variant, config.num_layers, config.hidden_dim, ds.feature_dim(), ds.num_classes,
                             result.params});
  out << "train: variant=" << to_string(config.variant) << " layers=" << config.num_layers
      << " epochs=" << result.report.epochs.size() << " best_epoch=" << result.report.best_epoch << " test_acc="
      << (result.report.test_acc ? pct(*result.report.test_acc) : std::string("n/a")) << " out=" << dir.string()
      << "\n";
  return kOk;
}

struct SweepCmd {
  Common common;
  ModelFlags model;
  std::string dataset;
  std::vector<std::size_t> depths{2, 4, 8, 16, 32, 64};
  std::size_t splits = 1;
  std::optional<std::uint64_t> split_seed;
  std::size_t jobs = 1;
  bool self_edges = false;
};

int cmd_sweep(const SweepCmd& a, std::ostream& out) {
  const ModelConfig config = to_config(a.model, a.common.seed);
  if (a.jobs == 0) throw ConfigError("jobs: must be positive");
  for (std::size_t d : a.depths) {
    ModelConfig c = config;
    c.num_layers = d;
    c.validate();
  }
  HyperDataset ds = load_dataset(a.dataset, LoadOptions{a.self_edges});
  SweepOptions opt;
  opt.num_splits = a.splits;
  opt.split_seed = a.split_seed.value_or(a.common.seed);
  opt.jobs = a.jobs;
  auto report = depth_sweep(ds, a.depths, config, opt);
  const fs::path dir = prepare_out_dir(a.common);
  write_text(dir / "sweep.csv", report.to_csv());
  json doc = report.to_json();
  doc["dataset"] = fs::path(a.dataset).filename().string();
  write_json(dir / "sweep.json", doc);
  for (const auto& row : report.rows) {
    out << "sweep: variant=" << to_string(config.variant) << " depth=" << row.depth << " mean=" << pct(row.mean)
        << " std=" << pct(row.std) << " splits=" << row.accuracies.size() << "\n";
  }
  out << "sweep: wrote " << (dir / "sweep.csv").string() << "\n";
  return kOk;
}

struct AnalyzeCmd {
  Common common;
  ModelFlags model;
  std::string dataset;
  std::string checkpoint;
  std::size_t eigen_cap = kDefaultEigenCap;
  double weight_norm = 0.0;
  bool self_edges = false;
};

int cmd_analyze(const AnalyzeCmd& a, std::ostream& out) {
  ModelConfig config = to_config(a.model, a.common.seed);
  if (a.weight_norm < 0.0) throw ConfigError("weight-norm: must be >= 0");
  HyperDataset ds = load_dataset(a.dataset, LoadOptions{a.self_edges});

  ModelParams params;
  if (!a.checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    if (ck.feature_dim != ds.feature_dim() || ck.num_classes != ds.num_classes) {
      throw DataError("checkpoint: dimensions " + std::to_string(ck.feature_dim) + "x" +
                      std::to_string(ck.num_classes) + " do not match dataset " + std::to_string(ds.feature_dim()) +
                      "x" + std::to_string(ds.num_classes));
    }
    config.variant = ck.variant;
    config.num_layers = ck.num_layers;
    config.hidden_dim = ck.hidden_dim;
    params = std::move(ck.params);
  } else {
    params = init_params(config, ds.feature_dim(), ds.num_classes, Rng(config.seed).stream("init"));
  }
  if (a.weight_norm > 0.0) rescale_layer_weights(params, a.weight_norm);

  json doc;
  doc["dataset"] = fs::path(a.dataset).filename().string();
  doc["num_nodes"] = ds.num_nodes();
  doc["num_hyperedges"] = ds.graph.num_edges();
  auto comp = connected_components(ds.graph);
  const std::size_t num_comp = 1 + *std::max_element(comp.begin(), comp.end());
  doc["components"] = num_comp;
  doc["connected"] = num_comp == 1;
  if (num_comp == 1) {
    auto pi = stationary_distribution_P(ds.graph);
    auto pi_t = stationary_distribution_T(ds.graph);
    double sum = 0.0;
    for (double v : pi_t) sum += v;
    doc["stationary"] = {{"pi_T", pi_t}, {"pi_T_sum", sum}, {"pi_P", pi}};
    out << "analyze: stationary distribution sums to " << format_double(sum) << "\n";
  } else {
    doc["stationary"] = nullptr;
    out << "analyze: hypergraph has " << num_comp << " components; stationary distribution not unique\n";
  }
  json eigen{{"cap", a.eigen_cap}};
  if (ds.num_nodes() > a.eigen_cap) {
    eigen["status"] = "skipped";
    eigen["reason"] = "num_nodes exceeds eigen cap";
    out << "analyze: eigen section skipped (n=" << ds.num_nodes() << " > cap " << a.eigen_cap << ")\n";
  } else {
    double lam = min_nonzero_eigenvalue(laplacian(ds.graph), a.eigen_cap);
    eigen["status"] = "computed";
    eigen["min_nonzero_eigenvalue"] = lam;
    eigen["lambda_bar"] = (1 - lam) * (1 - lam);
    out << "analyze: min nonzero eigenvalue " << format_double(lam) << "\n";
  }
  doc["eigen"] = std::move(eigen);

  EnergyTrace trace = energy_probe(params, ds, config);
  json model = config_to_json(config);
  model["source"] = a.checkpoint.empty() ? "random" : "checkpoint";
  if (a.weight_norm > 0.0) model["layer_weight_norm"] = a.weight_norm;
  doc["model"] = std::move(model);
  doc["energy"] = {{"initial", trace.energies.front()},
                   {"final", trace.energies.back()},
                   {"final_over_initial",
                    trace.energies.front() > 0 ? trace.energies.back() / trace.energies.front() : 0.0}};

  const fs::path dir = prepare_out_dir(a.common);
  write_json(dir / "analysis.json", doc);
  write_text(dir / "energy_trace.csv", trace.to_csv());
  out << "analyze: energy " << format_double(trace.energies.front()) << " -> " << format_double(trace.energies.back())
      << " over " << config.num_layers << " layers; wrote " << dir.string() << "\n";
  return kOk;
}

struct VerifyCmd {
  Common common;
  std::size_t trials = 100;
  std::size_t max_nodes = 50;
  bool corrupt_delta = false;
};

int cmd_verify(const VerifyCmd& a, std::ostream& out) {
  if (a.trials == 0) throw ConfigError("trials: must be positive");
  if (a.max_nodes < 2) throw ConfigError("max-nodes: must be at least 2");
  VerifyOptions opt;
  opt.trials = a.trials;
  opt.seed = a.common.seed;
  opt.max_nodes = a.max_nodes;
  opt.corrupt_delta = a.corrupt_delta;
  VerifyReport rep = run_verification(opt);
  const fs::path dir = prepare_out_dir(a.common);
  json doc = rep.to_json();
  doc["seed"] = a.common.seed;
  doc["trials"] = a.trials;
  doc["corrupt_delta"] = a.corrupt_delta;
  write_json(dir / "verify.json", doc);
  out << rep.to_text();
  std::size_t passed = 0;
  for (const auto& c : rep.checks) passed += c.passed ? 1 : 0;
  out << "verify: " << passed << "/" << rep.checks.size() << " checks passed\n";
  return rep.all_passed() ? kOk : kVerifyFailed;
}

struct SynthCmd {
  Common common;
  SyntheticSpec spec;
  std::string output;
};

int cmd_synth(SynthCmd a, std::ostream& out) {
  a.spec.seed = a.common.seed;
  HyperDataset ds = generate_synthetic(a.spec);
  fs::path path;
  if (a.output.empty()) {
    path = prepare_out_dir(a.common) / "dataset.json";
  } else {
    path = a.output;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
  }
  save_dataset(ds, path.string());
  out << "synth: " << ds.num_nodes() << " nodes, " << ds.graph.num_edges() << " hyperedges, " << ds.num_classes
      << " classes, bridged " << ds.meta.at("bridged_components") << " -> " << path.string() << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hypergraph convolution toolkit", "hgx"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hgx 0.1.0");

  TrainCmd train_args;
  auto* train_cmd = app.add_subcommand("train", "Train one model and write a report and checkpoint");
  add_common(train_cmd, train_args.common);
  add_model_flags(train_cmd, train_args.model);
  train_cmd->add_option("--dataset", train_args.dataset, "Dataset JSON")->required();
  train_cmd->add_flag("--self-edges", train_args.self_edges, "Add a singleton hyperedge for every uncovered node");
  train_cmd->add_flag("--record-timing", train_args.record_timing, "Include wall-clock seconds in the report");

  SweepCmd sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train across depths and splits");
  add_common(sweep_cmd, sweep_args.common);
  add_model_flags(sweep_cmd, sweep_args.model);
  sweep_cmd->add_option("--dataset", sweep_args.dataset, "Dataset JSON")->required();
  sweep_cmd->add_option("--depths", sweep_args.depths, "Comma-separated depths")->delimiter(',');
  sweep_cmd->add_option("--splits", sweep_args.splits, "Number of splits (1 uses the dataset's masks)");
  sweep_cmd->add_option("--split-seed", sweep_args.split_seed, "Base seed for generated splits (default --seed)");
  sweep_cmd->add_option("--jobs", sweep_args.jobs, "Concurrent training runs");
  sweep_cmd->add_flag("--self-edges", sweep_args.self_edges, "Add a singleton hyperedge for every uncovered node");

  AnalyzeCmd analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "Stationary distribution, spectrum and energy trace");
  add_common(analyze_cmd, analyze_args.common);
  add_model_flags(analyze_cmd, analyze_args.model);
  analyze_cmd->add_option("--dataset", analyze_args.dataset, "Dataset JSON")->required();
  analyze_cmd->add_option("--checkpoint", analyze_args.checkpoint, "Trained model (default: random weights)");
  analyze_cmd->add_option("--eigen-cap", analyze_args.eigen_cap, "Skip the eigensolver above this many nodes");
  analyze_cmd->add_option("--weight-norm", analyze_args.weight_norm,
                          "Rescale layer weights to this spectral norm (0 keeps them)");
  analyze_cmd->add_flag("--self-edges", analyze_args.self_edges, "Add a singleton hyperedge for every uncovered node");

  VerifyCmd verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "Numerical checks of the smoothing and expressiveness results");
  add_common(verify_cmd, verify_args.common);
  verify_cmd->add_option("--trials", verify_args.trials, "Random trials per check");
  verify_cmd->add_option("--max-nodes", verify_args.max_nodes, "Largest random hypergraph");
  verify_cmd->add_flag("--corrupt-delta", verify_args.corrupt_delta, "Self-test: perturb the Laplacian");

  SynthCmd synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-partition dataset");
  add_common(synth_cmd, synth_args.common);
  SyntheticSpec& s = synth_args.spec;
  synth_cmd->add_option("--nodes", s.num_nodes, "Number of nodes");
  synth_cmd->add_option("--classes", s.num_classes, "Number of classes");
  synth_cmd->add_option("--hyperedges", s.num_hyperedges, "Number of hyperedges");
  synth_cmd->add_option("--mean-edge-size", s.mean_edge_size, "Mean hyperedge size");
  synth_cmd->add_option("--homophily", s.homophily, "Probability a hyperedge stays inside one class");
  synth_cmd->add_option("--feature-dim", s.feature_dim, "Feature dimension");
  synth_cmd->add_option("--separation", s.separation, "Distance between class centers");
  synth_cmd->add_option("--noise", s.noise, "Feature noise standard deviation");
  synth_cmd->add_option("--train-per-class", s.train_per_class, "Training nodes per class");
  synth_cmd->add_option("--val-per-class", s.val_per_class, "Validation nodes per class");
  synth_cmd->add_option("--output", synth_args.output, "Output file (default <out-dir>/dataset.json)");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = merge_config(std::move(args), app);
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app.exit(e, out, err);
      err << "hgx: error: " << e.what() << "\n";
      return kConfig;
    }
    if (train_cmd->parsed()) return cmd_train(train_args, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, out);
    if (analyze_cmd->parsed()) return cmd_analyze(analyze_args, out);
    if (verify_cmd->parsed()) return cmd_verify(verify_args, out);
    if (synth_cmd->parsed()) return cmd_synth(synth_args, out);
    err << "hgx: error: no subcommand\n";
    return kConfig;
  } catch (const ConfigError& e) {
    err << "hgx: config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    err << "hgx: data error: " << e.what() << "\n";
    return kData;
  } catch (const DimensionError& e) {
    err << "hgx: data error: " << e.what() << "\n";
    return kData;
  } catch (const DisconnectedError& e) {
    err << "hgx: data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "hgx: internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace hgx::cli
