#include "hgx/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hgx/errors.hpp"
#include "hgx/format.hpp"

namespace hgx {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::deep_hgcn: return "deep-hgcn";
    case Variant::hgnn: return "hgnn";
    case Variant::shgcn: return "shgcn";
    case Variant::mlp: return "mlp";
  }
  return "unknown";
}

Variant parse_variant(std::string_view s) {
  if (s == "deep-hgcn") return Variant::deep_hgcn;
  if (s == "hgnn") return Variant::hgnn;
  if (s == "shgcn") return Variant::shgcn;
  if (s == "mlp") return Variant::mlp;
  throw ConfigError("unknown variant '" + std::string(s) + "' (expected deep-hgcn, hgnn, shgcn or mlp)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (num_layers < 1) fail("layers must be >= 1, got " + std::to_string(num_layers));
  if (hidden_dim < 1) fail("hidden-dim must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1], got " + format_double(alpha));
  if (!(lambda_id >= 0.0) || !std::isfinite(lambda_id)) fail("lambda-id must be >= 0, got " + format_double(lambda_id));
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1), got " + format_double(dropout));
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("lr must be a finite value >= 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight-decay must be a finite value >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (activation.kind == ActivationKind::leaky_relu && !(activation.slope >= 0.0 && activation.slope <= 1.0)) {
    fail("leaky-relu slope must lie in [0, 1]");
  }
}

double beta_schedule(std::size_t layer, double lambda_id) {
  if (layer < 1) throw ConfigError("beta_schedule: layer index starts at 1");
  if (lambda_id < 0.0) throw ConfigError("beta_schedule: lambda must be >= 0");
  return std::log(lambda_id / static_cast<double>(layer) + 1.0);
}

// ---------------------------------------------------------------------------
// ModelParams

DenseMatrix& ModelParams::tensor(std::size_t i) {
  if (i == 0) return theta_in;
  if (i <= layer_weights.size()) return layer_weights[i - 1];
  return theta_out;
}

const DenseMatrix& ModelParams::tensor(std::size_t i) const {
  if (i == 0) return theta_in;
  if (i <= layer_weights.size()) return layer_weights[i - 1];
  return theta_out;
}

std::string ModelParams::tensor_name(std::size_t i) const {
  if (i == 0) return "theta_in";
  if (i <= layer_weights.size()) return "theta_layer_" + std::to_string(i);
  return "theta_out";
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.theta_in = DenseMatrix(theta_in.rows(), theta_in.cols());
  for (const auto& w : layer_weights) z.layer_weights.emplace_back(w.rows(), w.cols());
  z.theta_out = DenseMatrix(theta_out.rows(), theta_out.cols());
  return z;
}

double ModelParams::squared_norm() const {
  double s = 0.0;
  for (std::size_t i = 0; i < tensor_count(); ++i) {
    for (double v : tensor(i).values()) s += v * v;
  }
  return s;
}

namespace {

DenseMatrix glorot(std::size_t fan_in, std::size_t fan_out, Rng rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  DenseMatrix w(fan_in, fan_out);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::size_t feature_dim, std::size_t num_classes, const Rng& rng) {
  if (feature_dim == 0 || num_classes == 0 || config.hidden_dim == 0) {
    throw ConfigError("init_params: dimensions must be positive");
  }
  ModelParams params;
  params.theta_in = glorot(feature_dim, config.hidden_dim, rng.stream("theta_in"));
  if (config.variant != Variant::shgcn) {
    const Rng layers = rng.stream("layers");
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      params.layer_weights.push_back(glorot(config.hidden_dim, config.hidden_dim, layers.stream(l)));
    }
  }
  params.theta_out = glorot(config.hidden_dim, num_classes, rng.stream("theta_out"));
  return params;
}

// ---------------------------------------------------------------------------
// Layers

namespace {

DenseMatrix identity_mapped(const DenseMatrix& theta, double beta) {
  DenseMatrix w = beta * theta;
  for (std::size_t i = 0; i < w.rows(); ++i) w(i, i) += 1.0 - beta;
  return w;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

}  // namespace

DenseMatrix deep_hgcn_layer_forward(const SparseMatrix& p, const DenseMatrix& x_l, const DenseMatrix& x_0, double alpha,
                                    double beta, const DenseMatrix& theta, Activation act) {
  require(x_l.same_shape(x_0), "deep_hgcn_layer_forward: X_l and X_0 differ in shape");
  require(p.cols() == x_l.rows(), "deep_hgcn_layer_forward: P does not match X_l");
  require(theta.rows() == x_l.cols() && theta.cols() == x_l.cols(), "deep_hgcn_layer_forward: Θ must be c x c");
  DenseMatrix mixed = (1.0 - alpha) * spmm(p, x_l);
  mixed += alpha * x_0;
  return elementwise_activation(matmul(mixed, identity_mapped(theta, beta)), act);
}

DenseMatrix hgnn_layer_forward(const SparseMatrix& p, const DenseMatrix& x_l, const DenseMatrix& theta,
                               Activation act) {
  require(p.cols() == x_l.rows(), "hgnn_layer_forward: P does not match X_l");
  require(theta.rows() == x_l.cols(), "hgnn_layer_forward: Θ rows != feature columns");
  return elementwise_activation(matmul(spmm(p, x_l), theta), act);
}

DenseMatrix shgcn_forward(const SparseMatrix& p, const DenseMatrix& x, const DenseMatrix& theta, std::size_t k) {
  require(p.cols() == x.rows(), "shgcn_forward: P does not match X");
  require(theta.rows() == x.cols(), "shgcn_forward: Θ rows != feature columns");
  DenseMatrix h = x;
  for (std::size_t i = 0; i < k; ++i) h = spmm(p, h);
  return row_softmax(matmul(h, theta));
}

// ---------------------------------------------------------------------------
// Model

namespace {

struct Dropout {
  double rate;
  Mode mode;
  Rng* rng;

  DenseMatrix apply(const DenseMatrix& h, DenseMatrix& mask) const {
    if (mode == Mode::eval || rate == 0.0) {
      mask = DenseMatrix();
      return h;
    }
    if (rng == nullptr) throw std::invalid_argument("model_forward: train mode with dropout needs an Rng");
    const double keep = 1.0 - rate;
    mask = DenseMatrix(h.rows(), h.cols());
    for (double& m : mask.values()) m = rng->uniform() < keep ? 1.0 / keep : 0.0;
    return hadamard(h, mask);
  }
};

void maybe_round(DenseMatrix& m, bool f32) {
  if (f32) round_to_float(m);
}

}  // namespace

ForwardResult model_forward(const ModelParams& params, const SparseMatrix& p, const DenseMatrix& x,
                            const ModelConfig& config, Mode mode, Rng* dropout_rng) {
  require(x.cols() == params.theta_in.rows(), "model_forward: feature dim " + std::to_string(x.cols()) +
                                                  " does not match theta_in rows " +
                                                  std::to_string(params.theta_in.rows()));
  require(p.rows() == x.rows() && p.cols() == x.rows(), "model_forward: propagation matrix does not match node count");
  const bool needs_layers = config.variant != Variant::shgcn;
  require(!needs_layers || params.layer_weights.size() == config.num_layers,
          "model_forward: parameter set has " + std::to_string(params.layer_weights.size()) + " layers, config " +
              std::to_string(config.num_layers));

  const bool f32 = config.precision == Precision::f32;
  const Dropout drop{config.dropout, mode, dropout_rng};
  const Activation act = config.activation;

  ForwardTape tape;
  tape.variant = config.variant;
  tape.num_nodes = x.rows();
  tape.feature_dim = x.cols();
  tape.num_classes = params.theta_out.cols();

  tape.input = drop.apply(x, tape.input_mask);
  tape.x0_pre = matmul(tape.input, params.theta_in);
  maybe_round(tape.x0_pre, f32);

  DenseMatrix h;
  if (config.variant == Variant::shgcn) {
    tape.x0 = tape.x0_pre;
    tape.smoothed = tape.x0;
    for (std::size_t k = 0; k < config.num_layers; ++k) {
      tape.smoothed = spmm(p, tape.smoothed);
      maybe_round(tape.smoothed, f32);
    }
    h = tape.smoothed;
  } else {
    tape.x0 = elementwise_activation(tape.x0_pre, act);
    h = tape.x0;
    tape.layers.reserve(config.num_layers);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      LayerRecord rec;
      rec.input = drop.apply(h, rec.mask);
      const DenseMatrix& theta = params.layer_weights[l];
      DenseMatrix weight;
      switch (config.variant) {
        case Variant::deep_hgcn:
          rec.beta = beta_schedule(l + 1, config.lambda_id);
          rec.mixed = (1.0 - config.alpha) * spmm(p, rec.input);
          rec.mixed += config.alpha * tape.x0;
          weight = identity_mapped(theta, rec.beta);
          break;
        case Variant::hgnn:
          rec.mixed = spmm(p, rec.input);
          weight = theta;
          break;
        case Variant::mlp:
          rec.mixed = rec.input;
          weight = theta;
          break;
        case Variant::shgcn: break;
      }
      maybe_round(rec.mixed, f32);
      rec.pre_activation = matmul(rec.mixed, weight);
      maybe_round(rec.pre_activation, f32);
      rec.output = elementwise_activation(rec.pre_activation, act);
      h = rec.output;
      tape.layers.push_back(std::move(rec));
    }
  }

  tape.final_input = drop.apply(h, tape.final_mask);
  tape.logits = matmul(tape.final_input, params.theta_out);
  maybe_round(tape.logits, f32);

  ForwardResult out;
  out.logits = tape.logits;
  out.tape = std::move(tape);
  return out;
}

LossResult cross_entropy_masked(const DenseMatrix& logits, std::span<const int> labels,
                                std::span<const std::size_t> mask) {
  if (mask.empty()) throw DataError("cross_entropy_masked: mask is empty");
  if (labels.size() != logits.rows()) throw DimensionError("cross_entropy_masked: label count != logit rows");
  LossResult res;
  res.grad_logits = DenseMatrix(logits.rows(), logits.cols());
  const double inv = 1.0 / static_cast<double>(mask.size());
  for (std::size_t i : mask) {
    if (i >= logits.rows()) throw DataError("cross_entropy_masked: mask index out of range");
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw DataError("cross_entropy_masked: label out of range at node " + std::to_string(i));
    }
    const auto row = logits.row(i);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    res.loss += (log_z - row[static_cast<std::size_t>(y)]) * inv;
    auto g = res.grad_logits.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) g[j] = std::exp(row[j] - log_z) * inv;
    g[static_cast<std::size_t>(y)] -= inv;
  }
  return res;
}

double regularized_loss(double data_loss, const ModelParams& params, const ModelConfig& config) {
  return data_loss + 0.5 * config.weight_decay * params.squared_norm();
}

namespace {

DenseMatrix activation_backward(const DenseMatrix& grad_out, const DenseMatrix& pre, Activation act) {
  if (act.kind == ActivationKind::identity) return grad_out;
  DenseMatrix g = grad_out;
  auto gv = g.values();
  const auto pv = pre.values();
  for (std::size_t k = 0; k < gv.size(); ++k) gv[k] *= act.derivative(pv[k]);
  return g;
}

DenseMatrix mask_backward(DenseMatrix grad, const DenseMatrix& mask) {
  if (mask.empty()) return grad;
  return hadamard(grad, mask);
}

}  // namespace

ModelParams model_backward(const ForwardTape& tape, const DenseMatrix& grad_logits, const ModelParams& params,
                           const SparseMatrix& p, const ModelConfig& config) {
  require(grad_logits.same_shape(tape.logits), "model_backward: gradient shape does not match tape logits");
  require(tape.variant == config.variant, "model_backward: tape variant differs from config");
  require(tape.final_input.cols() == params.theta_out.rows() && tape.input.cols() == params.theta_in.rows(),
          "model_backward: stale tape (parameter shapes changed)");
  require(tape.layers.size() == params.layer_weights.size(), "model_backward: stale tape (layer count changed)");

  const Activation act = config.activation;
  ModelParams grads = params.zeros_like();

  grads.theta_out = matmul_tn(tape.final_input, grad_logits);
  DenseMatrix g_h = mask_backward(matmul_nt(grad_logits, params.theta_out), tape.final_mask);

  if (config.variant == Variant::shgcn) {
    // P is symmetric, so the adjoint of P^K is P^K.
    DenseMatrix g_x0 = g_h;
    for (std::size_t k = 0; k < config.num_layers; ++k) g_x0 = spmm(p, g_x0);
    grads.theta_in = matmul_tn(tape.input, g_x0);
  } else {
    DenseMatrix g_x0_residual(tape.x0.rows(), tape.x0.cols());
    for (std::size_t l = tape.layers.size(); l-- > 0;) {
      const LayerRecord& rec = tape.layers[l];
      const DenseMatrix& theta = params.layer_weights[l];
      const DenseMatrix g_pre = activation_backward(g_h, rec.pre_activation, act);
      DenseMatrix g_in;
      switch (config.variant) {
        case Variant::deep_hgcn: {
          grads.layer_weights[l] = rec.beta * matmul_tn(rec.mixed, g_pre);
          const DenseMatrix g_mixed = matmul_nt(g_pre, identity_mapped(theta, rec.beta));
          g_in = (1.0 - config.alpha) * spmm(p, g_mixed);
          g_x0_residual += config.alpha * g_mixed;
          break;
        }
        case Variant::hgnn:
          grads.layer_weights[l] = matmul_tn(rec.mixed, g_pre);
          g_in = spmm(p, matmul_nt(g_pre, theta));
          break;
        case Variant::mlp:
          grads.layer_weights[l] = matmul_tn(rec.mixed, g_pre);
          g_in = matmul_nt(g_pre, theta);
          break;
        case Variant::shgcn: break;
      }
      g_h = mask_backward(std::move(g_in), rec.mask);
    }
    g_h += g_x0_residual;
    grads.theta_in = matmul_tn(tape.input, activation_backward(g_h, tape.x0_pre, act));
  }

  if (config.weight_decay != 0.0) {
    for (std::size_t i = 0; i < grads.tensor_count(); ++i) grads.tensor(i) += config.weight_decay * params.tensor(i);
  }
  if (config.precision == Precision::f32) {
    for (std::size_t i = 0; i < grads.tensor_count(); ++i) round_to_float(grads.tensor(i));
  }
  return grads;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  require(params.tensor_count() == grads.tensor_count() && params.tensor_count() == state.m.tensor_count(),
          "adam_step: tensor count mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(AdamState::beta1, t);
  const double c2 = 1.0 - std::pow(AdamState::beta2, t);
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    auto w = params.tensor(i).values();
    const auto g = grads.tensor(i).values();
    auto m = state.m.tensor(i).values();
    auto v = state.v.tensor(i).values();
    require(w.size() == g.size() && w.size() == m.size(), "adam_step: tensor shape mismatch");
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = AdamState::beta1 * m[k] + (1.0 - AdamState::beta1) * g[k];
      v[k] = AdamState::beta2 * v[k] + (1.0 - AdamState::beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      w[k] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t v;
  static_assert(sizeof(v) == sizeof(d));
  std::memcpy(&v, &d, sizeof(v));
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("checkpoint: truncated tensor data");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &v, sizeof(d));
  return d;
}

std::uint32_t variant_code(Variant v) { return static_cast<std::uint32_t>(v); }

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os.write("HGCN", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, variant_code(ckpt.variant));
  put_u32(os, static_cast<std::uint32_t>(ckpt.num_layers));
  put_u32(os, static_cast<std::uint32_t>(ckpt.hidden_dim));
  put_u32(os, static_cast<std::uint32_t>(ckpt.feature_dim));
  put_u32(os, static_cast<std::uint32_t>(ckpt.num_classes));
  for (std::size_t i = 0; i < ckpt.params.tensor_count(); ++i) {
    for (double v : ckpt.params.tensor(i).values()) put_f64(os, v);
  }
}

Checkpoint read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string_view(magic, 4) != "HGCN") throw DataError("checkpoint: bad magic");
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  const std::uint32_t code = get_u32(is);
  if (code > variant_code(Variant::mlp)) throw DataError("checkpoint: unknown variant code");
  ckpt.variant = static_cast<Variant>(code);
  ckpt.num_layers = get_u32(is);
  ckpt.hidden_dim = get_u32(is);
  ckpt.feature_dim = get_u32(is);
  ckpt.num_classes = get_u32(is);

  auto read_tensor = [&](std::size_t r, std::size_t c) {
    DenseMatrix m(r, c);
    for (double& v : m.values()) v = get_f64(is);
    return m;
  };
  ckpt.params.theta_in = read_tensor(ckpt.feature_dim, ckpt.hidden_dim);
  if (ckpt.variant != Variant::shgcn) {
    for (std::size_t l = 0; l < ckpt.num_layers; ++l) {
      ckpt.params.layer_weights.push_back(read_tensor(ckpt.hidden_dim, ckpt.hidden_dim));
    }
  }
  ckpt.params.theta_out = read_tensor(ckpt.hidden_dim, ckpt.num_classes);
  if (is.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint: trailing bytes after tensors");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_checkpoint(os, ckpt);
  if (!os) throw std::runtime_error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path);
  return read_checkpoint(is);
}

}  // namespace hgx
