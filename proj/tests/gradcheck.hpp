#pragma once

// Central finite-difference check of model_backward for every parameter
// tensor. Dropout masks are replayed by re-deriving the same Rng stream for
// every loss evaluation.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hgx/hypergraph.hpp"
#include "hgx/nn.hpp"
#include "hgx/verify.hpp"

namespace gradcheck {

struct TensorError {
  std::string name;
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
};

struct Problem {
  hgx::Hypergraph graph;
  hgx::SparseMatrix p;
  hgx::DenseMatrix x;
  std::vector<int> labels;
  std::vector<std::size_t> mask;
  hgx::ModelConfig config;
  hgx::ModelParams params;
  std::uint64_t dropout_seed = 0;
};

inline double loss_at(const Problem& pr, const hgx::ModelParams& params) {
  hgx::Rng drop = hgx::Rng(pr.dropout_seed).stream("dropout");
  auto fwd = hgx::model_forward(params, pr.p, pr.x, pr.config, hgx::Mode::train, &drop);
  auto ce = hgx::cross_entropy_masked(fwd.logits, pr.labels, pr.mask);
  return hgx::regularized_loss(ce.loss, params, pr.config);
}

// Smallest nonzero |pre-activation| over every ReLU input; finite
// differences are only trustworthy away from the kink. Exact zeros come from
// fully dropped rows and stay zero under any weight perturbation.
inline double kink_margin(const Problem& pr) {
  hgx::Rng drop = hgx::Rng(pr.dropout_seed).stream("dropout");
  auto fwd = hgx::model_forward(pr.params, pr.p, pr.x, pr.config, hgx::Mode::train, &drop);
  double m = INFINITY;
  if (pr.config.variant != hgx::Variant::shgcn) {
    for (double v : fwd.tape.x0_pre.values()) m = v != 0.0 ? std::min(m, std::abs(v)) : m;
  }
  for (const auto& rec : fwd.tape.layers) {
    for (double v : rec.pre_activation.values()) m = v != 0.0 ? std::min(m, std::abs(v)) : m;
  }
  return m;
}

/// Builds a problem with n <= 20 nodes, K layers, small hidden width, moving
/// to the next seed until every pre-activation is at least `margin` from 0.
inline Problem make_problem(hgx::Variant variant, std::size_t layers, std::uint64_t seed, double dropout = 0.5,
                            double margin = 1e-3) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    hgx::Rng rng = hgx::Rng(seed).stream(attempt);
    Problem pr;
    const std::size_t n = 10 + rng.below(11);
    pr.graph = hgx::random_connected_hypergraph(rng, n, 4);
    pr.p = hgx::propagation_matrix(pr.graph);
    const std::size_t d = 5, classes = 3;
    pr.x = hgx::DenseMatrix(n, d);
    for (double& v : pr.x.values()) v = rng.normal();
    for (std::size_t i = 0; i < n; ++i) pr.labels.push_back(static_cast<int>(rng.below(classes)));
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.bernoulli(0.6)) pr.mask.push_back(i);
    }
    if (pr.mask.empty()) pr.mask.push_back(0);
    pr.config.variant = variant;
    pr.config.num_layers = layers;
    pr.config.hidden_dim = 4;
    pr.config.alpha = 0.3;
    pr.config.lambda_id = 1.5;
    pr.config.dropout = dropout;
    pr.config.weight_decay = 5e-3;
    pr.config.seed = seed;
    pr.params = hgx::init_params(pr.config, d, classes, rng.stream("init"));
    // Larger weights keep the signal away from zero in deep stacks.
    for (std::size_t t = 0; t < pr.params.tensor_count(); ++t) pr.params.tensor(t) *= 2.0;
    pr.dropout_seed = seed + 1000 * attempt;
    if (kink_margin(pr) >= margin) return pr;
  }
}

inline std::vector<TensorError> check(const Problem& pr, double h = 1e-5) {
  hgx::Rng drop = hgx::Rng(pr.dropout_seed).stream("dropout");
  auto fwd = hgx::model_forward(pr.params, pr.p, pr.x, pr.config, hgx::Mode::train, &drop);
  auto ce = hgx::cross_entropy_masked(fwd.logits, pr.labels, pr.mask);
  auto grads = hgx::model_backward(fwd.tape, ce.grad_logits, pr.params, pr.p, pr.config);

  std::vector<TensorError> out;
  for (std::size_t t = 0; t < pr.params.tensor_count(); ++t) {
    hgx::ModelParams probe = pr.params;
    auto values = probe.tensor(t).values();
    double diff = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double up = loss_at(pr, probe);
      values[i] = orig - h;
      const double down = loss_at(pr, probe);
      values[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads.tensor(t).values()[i];
      diff += (numeric - analytic) * (numeric - analytic);
      na += analytic * analytic;
      nn += numeric * numeric;
    }
    const double scale = std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
    out.push_back({pr.params.tensor_name(t), std::sqrt(diff) / scale});
  }
  return out;
}

}  // namespace gradcheck
