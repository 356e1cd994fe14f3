#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgx/linalg.hpp"
#include "hgx/rng.hpp"

namespace hgx {

enum class Variant { deep_hgcn, hgnn, shgcn, mlp };
enum class Precision { f64, f32 };
enum class Mode { train, eval };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);  // throws ConfigError

struct ModelConfig {
  Variant variant = Variant::deep_hgcn;
  std::size_t num_layers = 2;
  std::size_t hidden_dim = 32;
  double alpha = 0.1;      // initial-residual strength, same for every layer
  double lambda_id = 0.5;  // identity-mapping schedule parameter
  double dropout = 0.5;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  std::size_t epochs = 300;
  std::size_t patience = 100;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;
  Activation activation = Activation::relu();

  /// Throws ConfigError naming the first field out of range.
  void validate() const;
};

/// beta_l = ln(lambda / l + 1) for layer index l >= 1.
double beta_schedule(std::size_t layer, double lambda_id);

/// All learnable tensors. No bias terms.
struct ModelParams {
  DenseMatrix theta_in;                   // feature_dim x hidden
  std::vector<DenseMatrix> layer_weights;  // num_layers of hidden x hidden (empty for shgcn)
  DenseMatrix theta_out;                  // hidden x num_classes

  std::size_t tensor_count() const { return layer_weights.size() + 2; }
  DenseMatrix& tensor(std::size_t i);
  const DenseMatrix& tensor(std::size_t i) const;
  std::string tensor_name(std::size_t i) const;

  ModelParams zeros_like() const;
  double squared_norm() const;
};

/// Glorot-uniform weights, one named Rng stream per tensor.
ModelParams init_params(const ModelConfig& config, std::size_t feature_dim, std::size_t num_classes, const Rng& rng);

// ---------------------------------------------------------------------------
// Layers. Dropout is applied by the model to layer inputs; the layer
// functions are deterministic.

/// act(((1 - alpha) P X_l + alpha X_0) ((1 - beta) I + beta Θ)).
DenseMatrix deep_hgcn_layer_forward(const SparseMatrix& p, const DenseMatrix& x_l, const DenseMatrix& x_0, double alpha,
                                    double beta, const DenseMatrix& theta, Activation act = Activation::relu());

/// act(P X_l Θ).
DenseMatrix hgnn_layer_forward(const SparseMatrix& p, const DenseMatrix& x_l, const DenseMatrix& theta,
                               Activation act = Activation::relu());

/// softmax(P^k X Θ): rows are class probabilities.
DenseMatrix shgcn_forward(const SparseMatrix& p, const DenseMatrix& x, const DenseMatrix& theta, std::size_t k);

// ---------------------------------------------------------------------------

struct LayerRecord {
  DenseMatrix mask;       // dropout mask on the layer input (scaled), empty in eval
  DenseMatrix input;      // layer input after dropout
  DenseMatrix mixed;      // operand multiplied by the weight: (1-a) P H + a X0, P H, or H
  DenseMatrix pre_activation;
  DenseMatrix output;
  double beta = 0.0;      // deep-hgcn only
};

/// Everything model_backward needs, recorded by model_forward.
struct ForwardTape {
  Variant variant = Variant::deep_hgcn;
  std::size_t num_nodes = 0;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  DenseMatrix input_mask;
  DenseMatrix input;        // features after dropout
  DenseMatrix x0_pre;       // input · Θ_in
  DenseMatrix x0;           // act(x0_pre); for shgcn x0 = x0_pre
  std::vector<LayerRecord> layers;
  DenseMatrix smoothed;     // shgcn: P^K x0
  DenseMatrix final_mask;
  DenseMatrix final_input;  // dropout(X^(K))
  DenseMatrix logits;
};

struct ForwardResult {
  DenseMatrix logits;
  ForwardTape tape;
};

/// Input FC, K propagation layers, output FC. `dropout_rng` is consumed in
/// train mode only; passing a freshly derived stream makes masks repeatable.
///
/// deep-hgcn: X0 = act(drop(X) Θ_in), H <- act(((1-a) P drop(H) + a X0) Θ_I^(l))
/// hgnn:      H <- act(P drop(H) Θ^(l))
/// mlp:       H <- act(drop(H) Θ^(l))
/// shgcn:     X0 = drop(X) Θ_in (no activation), H = P^K X0
/// logits = drop(H) Θ_out in every variant.
ForwardResult model_forward(const ModelParams& params, const SparseMatrix& p, const DenseMatrix& x,
                            const ModelConfig& config, Mode mode, Rng* dropout_rng = nullptr);

struct LossResult {
  double loss = 0.0;
  DenseMatrix grad_logits;
};

/// Mean negative log-likelihood over the masked rows from a stabilized
/// log-softmax. Throws DataError for an empty mask or out-of-range label.
LossResult cross_entropy_masked(const DenseMatrix& logits, std::span<const int> labels,
                                std::span<const std::size_t> mask);

/// Cross-entropy plus (weight_decay / 2) * sum of squared weights.
double regularized_loss(double data_loss, const ModelParams& params, const ModelConfig& config);

/// Exact reverse pass over the tape. Weight decay gradients are included.
/// Throws DimensionError if the tape does not match params.
ModelParams model_backward(const ForwardTape& tape, const DenseMatrix& grad_logits, const ModelParams& params,
                           const SparseMatrix& p, const ModelConfig& config);

struct AdamState {
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double epsilon = 1e-8;

  ModelParams m;
  ModelParams v;
  std::size_t step = 0;

  explicit AdamState(const ModelParams& like) : m(like.zeros_like()), v(like.zeros_like()) {}
};

/// Bias-corrected Adam update in place.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

// ---------------------------------------------------------------------------
// Checkpoints: "HGCN" magic, u32 version, u32 variant, u32 K, u32 hidden,
// u32 feature_dim, u32 num_classes, then every tensor row-major as
// little-endian IEEE-754 doubles in declaration order.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Variant variant = Variant::deep_hgcn;
  std::size_t num_layers = 0;
  std::size_t hidden_dim = 0;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  ModelParams params;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);  // throws DataError
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hgx
