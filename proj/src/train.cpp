#include "hgx/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "hgx/errors.hpp"
#include "hgx/format.hpp"

namespace hgx {

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  std::string act = c.activation.kind == ActivationKind::relu         ? "relu"
                    : c.activation.kind == ActivationKind::leaky_relu ? "leaky-relu"
                                                                      : "identity";
  return json{{"variant", std::string(to_string(c.variant))},
              {"layers", c.num_layers},
              {"hidden", c.hidden_dim},
              {"alpha", c.alpha},
              {"lambda_id", c.lambda_id},
              {"dropout", c.dropout},
              {"lr", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"epochs", c.epochs},
              {"patience", c.patience},
              {"seed", c.seed},
              {"precision", c.precision == Precision::f32 ? 32 : 64},
              {"activation", act}};
}

double accuracy(const DenseMatrix& logits, std::span<const int> labels, std::span<const std::size_t> mask) {
  if (mask.empty()) throw DataError("accuracy: empty mask");
  if (labels.size() != logits.rows()) throw DimensionError("accuracy: label count does not match logits rows");
  std::size_t correct = 0;
  for (std::size_t i : mask) {
    if (i >= logits.rows()) throw DataError("accuracy: mask node out of range");
    auto row = logits.row(i);
    // max_element returns the first maximum, i.e. the lowest tied index.
    auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

double evaluate(const ModelParams& params, const HyperDataset& ds, const SparseMatrix& p,
                std::span<const std::size_t> mask, const ModelConfig& config) {
  auto out = model_forward(params, p, ds.features, config, Mode::eval);
  return accuracy(out.logits, ds.labels, mask);
}

double evaluate(const ModelParams& params, const HyperDataset& ds, std::span<const std::size_t> mask,
                const ModelConfig& config) {
  return evaluate(params, ds, propagation_matrix(ds.graph), mask, config);
}

json TrainReport::to_json(bool include_timing) const {
  json epochs_json = json::array();
  for (const auto& e : epochs) {
    json row{{"epoch", e.epoch}, {"objective", e.objective}, {"train_loss", e.train_loss}, {"train_acc", e.train_acc}};
    if (e.val_acc) row["val_acc"] = *e.val_acc;
    epochs_json.push_back(std::move(row));
  }
  json doc{{"config", config_to_json(config)},
           {"num_nodes", num_nodes},
           {"feature_dim", feature_dim},
           {"num_classes", num_classes},
           {"stop_signal", signal == StopSignal::val_acc ? "val_acc" : "train_loss"},
           {"epochs", std::move(epochs_json)},
           {"epochs_run", epochs.size()},
           {"best_epoch", best_epoch},
           {"best_signal", best_signal},
           {"stopped_early", stopped_early},
           {"seed", config.seed}};
  doc["test_acc"] = test_acc ? json(*test_acc) : json(nullptr);
  if (include_timing) doc["wall_seconds"] = wall_seconds;
  return doc;
}

TrainResult train(const HyperDataset& ds, const ModelConfig& config) {
  return train(ds, propagation_matrix(ds.graph), config);
}

TrainResult train(const HyperDataset& ds, const SparseMatrix& p, const ModelConfig& config) {
  config.validate();
  if (ds.train_mask.empty()) throw DataError("train_mask: empty, nothing to train on");
  if (ds.features.rows() != ds.num_nodes() || ds.labels.size() != ds.num_nodes()) {
    throw DataError("dataset: feature or label rows do not match num_nodes");
  }
  const auto start = std::chrono::steady_clock::now();
  const bool f32 = config.precision == Precision::f32;

  const Rng root(config.seed);
  ModelParams params = init_params(config, ds.feature_dim(), ds.num_classes, root.stream("init"));
  if (f32) {
    for (std::size_t i = 0; i < params.tensor_count(); ++i) round_to_float(params.tensor(i));
  }
  AdamState adam(params);
  const Rng dropout_root = root.stream("dropout");

  TrainReport report;
  report.config = config;
  report.num_nodes = ds.num_nodes();
  report.feature_dim = ds.feature_dim();
  report.num_classes = ds.num_classes;
  report.signal = ds.has_val() ? StopSignal::val_acc : StopSignal::train_loss;

  ModelParams best = params;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng drop_rng = dropout_root.stream(static_cast<std::uint64_t>(epoch));
    auto fwd = model_forward(params, p, ds.features, config, Mode::train, &drop_rng);
    auto loss = cross_entropy_masked(fwd.logits, ds.labels, ds.train_mask);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.objective = regularized_loss(loss.loss, params, config);
    auto grads = model_backward(fwd.tape, loss.grad_logits, params, p, config);
    adam_step(params, grads, adam, config.learning_rate);
    if (f32) {
      for (std::size_t i = 0; i < params.tensor_count(); ++i) round_to_float(params.tensor(i));
    }

    auto eval = model_forward(params, p, ds.features, config, Mode::eval);
    rec.train_loss = cross_entropy_masked(eval.logits, ds.labels, ds.train_mask).loss;
    rec.train_acc = accuracy(eval.logits, ds.labels, ds.train_mask);
    if (ds.has_val()) rec.val_acc = accuracy(eval.logits, ds.labels, ds.val_mask);
    report.epochs.push_back(rec);

    double signal = report.signal == StopSignal::val_acc ? *rec.val_acc : rec.train_loss;
    bool improved = epoch == 1 || (report.signal == StopSignal::val_acc ? signal > report.best_signal
                                                                        : signal < report.best_signal);
    if (!std::isfinite(signal)) improved = false;
    if (improved) {
      report.best_epoch = epoch;
      report.best_signal = signal;
      best = params;
      since_best = 0;
    } else if (++since_best > config.patience) {
      report.stopped_early = epoch < config.epochs;
      break;
    }
  }

  if (!ds.test_mask.empty()) report.test_acc = evaluate(best, ds, p, ds.test_mask, config);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(best), std::move(report)};
}

// ---------------------------------------------------------------------------

std::vector<Split> generate_splits(const HyperDataset& ds, std::size_t num_splits, std::uint64_t base_seed,
                                   std::size_t fallback_train_per_class, std::size_t fallback_val_per_class) {
  const std::size_t classes = ds.num_classes;
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < ds.num_nodes(); ++i) members[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  std::vector<std::size_t> train_count(classes, 0), val_count(classes, 0);
  if (ds.train_mask.empty()) {
    for (std::size_t k = 0; k < classes; ++k) {
      train_count[k] = std::min(fallback_train_per_class, members[k].size());
      val_count[k] = std::min(fallback_val_per_class, members[k].size() - train_count[k]);
    }
  } else {
    for (std::size_t i : ds.train_mask) ++train_count[static_cast<std::size_t>(ds.labels[i])];
    for (std::size_t i : ds.val_mask) ++val_count[static_cast<std::size_t>(ds.labels[i])];
  }

  std::vector<Split> splits(num_splits);
  for (std::size_t s = 0; s < num_splits; ++s) {
    Rng rng = Rng(base_seed + s).stream("split");
    Split& sp = splits[s];
    for (std::size_t k = 0; k < classes; ++k) {
      std::vector<std::size_t> pool = members[k];
      rng.shuffle(pool);
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (i < train_count[k]) {
          sp.train.push_back(pool[i]);
        } else if (i < train_count[k] + val_count[k]) {
          sp.val.push_back(pool[i]);
        } else {
          sp.test.push_back(pool[i]);
        }
      }
    }
    std::sort(sp.train.begin(), sp.train.end());
    std::sort(sp.val.begin(), sp.val.end());
    std::sort(sp.test.begin(), sp.test.end());
  }
  return splits;
}

HyperDataset with_split(const HyperDataset& ds, const Split& split) {
  HyperDataset out = ds;
  out.train_mask = split.train;
  out.val_mask = split.val;
  out.test_mask = split.test;
  out.validate();
  return out;
}

std::string SweepReport::to_csv() const {
  std::ostringstream os;
  os << "variant,depth,split,seed,test_acc,best_epoch\n";
  for (const auto& r : runs) {
    os << to_string(config.variant) << ',' << r.depth << ',' << r.split << ',' << r.seed << ','
       << format_double(r.test_acc) << ',' << r.best_epoch << '\n';
  }
  return os.str();
}

json SweepReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"depth", r.depth}, {"mean", r.mean}, {"std", r.std}, {"accuracies", r.accuracies}});
  }
  json runs_json = json::array();
  for (const auto& r : runs) {
    runs_json.push_back({{"depth", r.depth},
                         {"split", r.split},
                         {"seed", r.seed},
                         {"test_acc", r.test_acc},
                         {"best_epoch", r.best_epoch}});
  }
  json cfg = config_to_json(config);
  cfg.erase("layers");
  return json{{"config", std::move(cfg)},
              {"depths", depths},
              {"num_splits", options.num_splits},
              {"split_seed", options.split_seed},
              {"dataset_splits", dataset_splits},
              {"rows", std::move(rows_json)},
              {"runs", std::move(runs_json)}};
}

SweepReport depth_sweep(const HyperDataset& ds, std::span<const std::size_t> depths, const ModelConfig& config,
                        const SweepOptions& options) {
  if (depths.empty()) throw ConfigError("depths: at least one depth is required");
  if (options.num_splits == 0) throw ConfigError("splits: must be positive");
  for (std::size_t d : depths) {
    ModelConfig c = config;
    c.num_layers = d;
    c.validate();
  }

  SweepReport report;
  report.config = config;
  report.depths.assign(depths.begin(), depths.end());
  report.options = options;
  report.dataset_splits = options.num_splits == 1;

  std::vector<HyperDataset> split_sets;
  if (report.dataset_splits) {
    split_sets.push_back(ds);
  } else {
    for (const auto& s : generate_splits(ds, options.num_splits, options.split_seed)) {
      split_sets.push_back(with_split(ds, s));
    }
  }
  const SparseMatrix p = propagation_matrix(ds.graph);

  const std::size_t total = depths.size() * options.num_splits;
  report.runs.resize(total);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t job = next.fetch_add(1);
      if (job >= total) return;
      const std::size_t di = job / options.num_splits;
      const std::size_t split = job % options.num_splits;
      try {
        ModelConfig c = config;
        c.num_layers = depths[di];
        c.seed = config.seed + split;
        auto result = train(split_sets[split], p, c);
        SweepRun& run = report.runs[job];
        run.depth = depths[di];
        run.split = split;
        run.seed = c.seed;
        run.test_acc = result.report.test_acc.value_or(0.0);
        run.best_epoch = result.report.best_epoch;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(total);
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.jobs, total));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::stable_sort(report.runs.begin(), report.runs.end(), [](const SweepRun& a, const SweepRun& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.split < b.split;
  });
  for (std::size_t i = 0; i < report.runs.size();) {
    SweepRow row;
    row.depth = report.runs[i].depth;
    for (; i < report.runs.size() && report.runs[i].depth == row.depth; ++i) {
      row.accuracies.push_back(report.runs[i].test_acc);
    }
    double sum = 0.0;
    for (double a : row.accuracies) sum += a;
    row.mean = sum / static_cast<double>(row.accuracies.size());
    double ss = 0.0;
    for (double a : row.accuracies) ss += (a - row.mean) * (a - row.mean);
    row.std = std::sqrt(ss / static_cast<double>(row.accuracies.size()));
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------

EnergyTrace energy_probe(const ModelParams& params, const HyperDataset& ds, const ModelConfig& config) {
  const SparseMatrix p = propagation_matrix(ds.graph);
  const SparseMatrix delta = laplacian(ds.graph);
  const bool connected = is_connected(ds.graph);
  auto fwd = model_forward(params, p, ds.features, config, Mode::eval);

  std::vector<DenseMatrix> reps;
  reps.push_back(fwd.tape.x0);
  if (config.variant == Variant::shgcn) {
    DenseMatrix h = fwd.tape.x0;
    for (std::size_t k = 0; k < config.num_layers; ++k) {
      h = spmm(p, h);
      reps.push_back(h);
    }
  } else {
    for (const auto& rec : fwd.tape.layers) reps.push_back(rec.output);
  }

  EnergyTrace trace;
  for (std::size_t l = 0; l < reps.size(); ++l) {
    trace.layers.push_back(l);
    trace.energies.push_back(dirichlet_energy(delta, reps[l]));
    if (connected) trace.distances.push_back(relative_distance_to_stationary(ds.graph, reps[l]));
  }
  return trace;
}

void rescale_layer_weights(ModelParams& params, double spectral_norm) {
  for (auto& w : params.layer_weights) {
    double s = max_singular_value(w);
    if (s > 0.0) w *= spectral_norm / s;
  }
}

}  // namespace hgx
