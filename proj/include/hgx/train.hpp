#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgx/data.hpp"
#include "hgx/nn.hpp"
#include "hgx/spectral.hpp"

namespace hgx {

nlohmann::json config_to_json(const ModelConfig& config);

/// Fraction of masked rows whose argmax equals the label. Ties between
/// logits resolve to the lowest class index. Throws DataError on an empty
/// mask.
double accuracy(const DenseMatrix& logits, std::span<const int> labels, std::span<const std::size_t> mask);

/// Eval-mode forward pass followed by accuracy().
double evaluate(const ModelParams& params, const HyperDataset& ds, std::span<const std::size_t> mask,
                const ModelConfig& config);
double evaluate(const ModelParams& params, const HyperDataset& ds, const SparseMatrix& p,
                std::span<const std::size_t> mask, const ModelConfig& config);

enum class StopSignal { val_acc, train_loss };

struct EpochRecord {
  std::size_t epoch = 0;     // 1-based
  double objective = 0.0;    // regularized dropout loss the step descended
  double train_loss = 0.0;   // eval-mode cross-entropy on train nodes after the step
  double train_acc = 0.0;
  std::optional<double> val_acc;
};

struct TrainReport {
  ModelConfig config;
  std::size_t num_nodes = 0;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  StopSignal signal = StopSignal::train_loss;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_signal = 0.0;
  bool stopped_early = false;
  std::optional<double> test_acc;  // absent when the test mask is empty
  double wall_seconds = 0.0;

  /// Timing is left out unless asked for so report files stay reproducible.
  nlohmann::json to_json(bool include_timing = false) const;
};

struct TrainResult {
  ModelParams params;  // best-signal parameters
  TrainReport report;
};

/// Full-batch Adam. After every step the model is evaluated without dropout;
/// the monitored signal is validation accuracy when a validation mask exists,
/// otherwise training loss. Strict improvement is required, so ties keep the
/// earlier epoch. Training stops once `patience + 1` consecutive epochs pass
/// without improvement, and the best parameters are restored.
TrainResult train(const HyperDataset& ds, const ModelConfig& config);
TrainResult train(const HyperDataset& ds, const SparseMatrix& p, const ModelConfig& config);

// ---------------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Stratified random splits. Split s draws from seed base_seed + s. Per-class
/// train and val counts are copied from the dataset's own masks; when the
/// dataset has no training nodes `fallback_train_per_class` and
/// `fallback_val_per_class` are used. Everything else becomes test.
std::vector<Split> generate_splits(const HyperDataset& ds, std::size_t num_splits, std::uint64_t base_seed,
                                   std::size_t fallback_train_per_class = 20, std::size_t fallback_val_per_class = 30);

HyperDataset with_split(const HyperDataset& ds, const Split& split);

struct SweepRun {
  std::size_t depth = 0;
  std::size_t split = 0;
  std::uint64_t seed = 0;
  double test_acc = 0.0;
  std::size_t best_epoch = 0;
};

struct SweepRow {
  std::size_t depth = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::vector<double> accuracies;  // in split order
};

struct SweepOptions {
  std::size_t num_splits = 1;
  std::uint64_t split_seed = 0;
  std::size_t jobs = 1;
};

struct SweepReport {
  ModelConfig config;  // depth field is overridden per row
  std::vector<std::size_t> depths;
  SweepOptions options;
  bool dataset_splits = false;  // true when the dataset's own masks were used
  std::vector<SweepRun> runs;   // sorted by depth, then split
  std::vector<SweepRow> rows;

  /// `variant,depth,split,seed,test_acc,best_epoch`
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// One training run per (depth, split). With a single split the dataset's
/// masks are used; otherwise generate_splits(ds, n, split_seed). Run seeds
/// are config.seed + split. Runs may execute on `jobs` threads; results do
/// not depend on the thread count.
SweepReport depth_sweep(const HyperDataset& ds, std::span<const std::size_t> depths, const ModelConfig& config,
                        const SweepOptions& options);

// ---------------------------------------------------------------------------

/// Energy E(X^(l)) and relative distance to the smoothing limit for the
/// representation after the input transform (l = 0) and after each of the
/// K layers, from an eval-mode forward pass. Distances are omitted for a
/// disconnected hypergraph.
EnergyTrace energy_probe(const ModelParams& params, const HyperDataset& ds, const ModelConfig& config);

/// Rescales every layer weight to the given largest singular value.
void rescale_layer_weights(ModelParams& params, double spectral_norm);

}  // namespace hgx
