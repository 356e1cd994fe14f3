#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gradcheck.hpp"
#include "hgx/errors.hpp"
#include "hgx/nn.hpp"
#include "hgx/spectral.hpp"
#include "hgx/verify.hpp"
#include "oracles.hpp"

using namespace hgx;

namespace {

DenseMatrix randn(Rng& rng, std::size_t r, std::size_t c) { return oracle::to_dense(oracle::random_mat(rng, r, c)); }

// Straight-line composition of the deep layer from primitives.
DenseMatrix deep_layer_oracle(const SparseMatrix& p, const DenseMatrix& xl, const DenseMatrix& x0, double alpha,
                              double beta, const DenseMatrix& theta, Activation act) {
  auto ph = oracle::from(spmm(p, xl));
  auto x0m = oracle::from(x0);
  auto mixed = oracle::zeros(ph.size(), ph[0].size());
  for (std::size_t i = 0; i < ph.size(); ++i) {
    for (std::size_t j = 0; j < ph[0].size(); ++j) mixed[i][j] = (1 - alpha) * ph[i][j] + alpha * x0m[i][j];
  }
  auto w = oracle::from(theta);
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) w[i][j] = (i == j ? 1 - beta : 0.0) + beta * w[i][j];
  }
  return elementwise_activation(oracle::to_dense(oracle::mul(mixed, w)), act);
}

}  // namespace

TEST_CASE("beta schedule") {
  CHECK(beta_schedule(1, 0.0) == 0.0);
  CHECK(beta_schedule(17, 0.0) == 0.0);
  CHECK(beta_schedule(1, 0.5) == doctest::Approx(0.405465).epsilon(1e-6));
  CHECK(beta_schedule(64, 0.5) == doctest::Approx(0.0077823).epsilon(1e-5));
  for (std::size_t l = 1; l < 100; ++l) CHECK(beta_schedule(l + 1, 0.5) < beta_schedule(l, 0.5));
}

TEST_CASE("deep layer limiting cases and compositional oracle") {
  Rng rng(31);
  auto g = random_connected_hypergraph(rng, 12);
  auto p = propagation_matrix(g);
  auto xl = randn(rng, 12, 4), x0 = randn(rng, 12, 4), theta = randn(rng, 4, 4);
  auto act = Activation::relu();

  // alpha = 1: output depends only on X0.
  auto a1 = deep_hgcn_layer_forward(p, xl, x0, 1.0, 0.3, theta, act);
  CHECK(a1 == deep_hgcn_layer_forward(p, randn(rng, 12, 4), x0, 1.0, 0.3, theta, act));
  auto w = (0.7 * DenseMatrix::identity(4)) + 0.3 * theta;
  CHECK(max_abs_diff(a1, elementwise_activation(matmul(x0, w), act)) < 1e-14);

  // beta = 0: Θ has no effect.
  auto b0 = deep_hgcn_layer_forward(p, xl, x0, 0.2, 0.0, theta, act);
  CHECK(b0 == deep_hgcn_layer_forward(p, xl, x0, 0.2, 0.0, randn(rng, 4, 4), act));
  auto mix = 0.8 * spmm(p, xl) + 0.2 * x0;
  CHECK(max_abs_diff(b0, elementwise_activation(mix, act)) < 1e-14);

  for (int t = 0; t < 10; ++t) {
    double alpha = rng.uniform(), beta = rng.uniform();
    auto th = randn(rng, 4, 4);
    CHECK(max_abs_diff(deep_hgcn_layer_forward(p, xl, x0, alpha, beta, th, act),
                       deep_layer_oracle(p, xl, x0, alpha, beta, th, act)) < 1e-12);
  }
  CHECK_THROWS_AS(deep_hgcn_layer_forward(p, xl, randn(rng, 12, 3), 0.1, 0.1, theta, act), DimensionError);
}

TEST_CASE("hgnn layer") {
  Rng rng(32);
  auto g = random_connected_hypergraph(rng, 15);
  auto p = propagation_matrix(g);
  auto x = randn(rng, 15, 3);
  CHECK(max_abs_diff(hgnn_layer_forward(p, x, DenseMatrix::identity(3), Activation::identity()), spmm(p, x)) < 1e-15);

  // Rows proportional to sqrt(d) are fixed by P.
  DenseMatrix fixed(15, 3);
  DenseMatrix row{{1.0, -2.0, 0.5}};
  for (std::size_t i = 0; i < 15; ++i) {
    for (std::size_t j = 0; j < 3; ++j) fixed(i, j) = std::sqrt(g.node_degrees()[i]) * row(0, j);
  }
  CHECK(max_abs_diff(hgnn_layer_forward(p, fixed, DenseMatrix::identity(3), Activation::relu()),
                     elementwise_activation(fixed, Activation::relu())) < 1e-12);

  auto theta = randn(rng, 3, 5);
  auto want = oracle::mul(oracle::mul(oracle::from(p.to_dense()), oracle::from(x)), oracle::from(theta));
  CHECK(max_abs_diff(hgnn_layer_forward(p, x, theta, Activation::relu()),
                     elementwise_activation(oracle::to_dense(want), Activation::relu())) < 1e-12);
}

TEST_CASE("shgcn forward") {
  Rng rng(33);
  auto g = random_connected_hypergraph(rng, 10);
  auto p = propagation_matrix(g);
  auto x = randn(rng, 10, 3), theta = randn(rng, 3, 2);
  CHECK(max_abs_diff(shgcn_forward(p, x, theta, 0), row_softmax(matmul(x, theta))) < 1e-15);
  auto x1 = randn(rng, 10, 1);
  CHECK(max_abs_diff(shgcn_forward(p, x1, DenseMatrix::identity(1), 1), row_softmax(spmm(p, x1))) < 1e-15);
  auto deep = shgcn_forward(p, x, theta, 400);
  auto lim = row_softmax(matmul(smoothing_limit(g, x), theta));
  CHECK(max_abs_diff(deep, lim) < 1e-8);
}

TEST_CASE("model forward: residual-only path, determinism and recomposition") {
  Rng rng(34);
  auto g = random_connected_hypergraph(rng, 14);
  auto p = propagation_matrix(g);
  auto x = randn(rng, 14, 6);
  ModelConfig c;
  c.num_layers = 3;
  c.hidden_dim = 5;
  c.alpha = 1.0;
  c.dropout = 0.0;
  auto params = init_params(c, 6, 3, Rng(1));
  auto out = model_forward(params, p, x, c, Mode::eval);
  // With alpha = 1 the graph is never consulted.
  auto id = SparseMatrix::identity(14);
  CHECK(max_abs_diff(out.logits, model_forward(params, id, x, c, Mode::eval).logits) < 1e-14);

  c.alpha = 0.1;
  c.dropout = 0.5;
  Rng d1 = Rng(5).stream("dropout"), d2 = Rng(5).stream("dropout");
  auto t1 = model_forward(params, p, x, c, Mode::train, &d1);
  auto t2 = model_forward(params, p, x, c, Mode::train, &d2);
  CHECK(t1.logits == t2.logits);
  CHECK(t1.tape.input_mask == t2.tape.input_mask);
  CHECK(t1.tape.logits == t1.logits);

  // Eval logits from a manual composition of the layer functions.
  for (Variant v : {Variant::deep_hgcn, Variant::hgnn, Variant::mlp, Variant::shgcn}) {
    c.variant = v;
    auto pr = init_params(c, 6, 3, Rng(2));
    auto got = model_forward(pr, p, x, c, Mode::eval).logits;
    DenseMatrix want;
    if (v == Variant::shgcn) {
      want = matmul(power_smooth(p, matmul(x, pr.theta_in), c.num_layers), pr.theta_out);
    } else {
      DenseMatrix x0 = elementwise_activation(matmul(x, pr.theta_in), Activation::relu());
      DenseMatrix h = x0;
      for (std::size_t l = 0; l < c.num_layers; ++l) {
        if (v == Variant::deep_hgcn) {
          h = deep_hgcn_layer_forward(p, h, x0, c.alpha, beta_schedule(l + 1, c.lambda_id), pr.layer_weights[l]);
        } else if (v == Variant::hgnn) {
          h = hgnn_layer_forward(p, h, pr.layer_weights[l]);
        } else {
          h = hgnn_layer_forward(id, h, pr.layer_weights[l]);
        }
      }
      want = matmul(h, pr.theta_out);
    }
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
  CHECK_THROWS_AS(model_forward(params, p, randn(rng, 14, 5), c, Mode::eval), DimensionError);
}

TEST_CASE("cross entropy") {
  std::vector<int> labels{0, 1};
  std::vector<std::size_t> mask{0, 1};
  auto sharp = cross_entropy_masked(DenseMatrix{{50, 0, 0}, {0, 50, 0}}, labels, mask);
  CHECK(sharp.loss < 1e-20);
  auto flat = cross_entropy_masked(DenseMatrix(2, 3), labels, mask);
  CHECK(flat.loss == doctest::Approx(std::log(3.0)));
  std::vector<std::size_t> none;
  CHECK_THROWS_AS(cross_entropy_masked(DenseMatrix(2, 3), labels, none), DataError);

  Rng rng(35);
  auto logits = randn(rng, 6, 4);
  std::vector<int> lab{0, 3, 2, 1, 1, 0};
  std::vector<std::size_t> m{0, 2, 3, 5};
  auto res = cross_entropy_masked(logits, lab, m);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      DenseMatrix up = logits, down = logits;
      up(i, j) += h;
      down(i, j) -= h;
      double fd = (cross_entropy_masked(up, lab, m).loss - cross_entropy_masked(down, lab, m).loss) / (2 * h);
      CHECK(std::abs(fd - res.grad_logits(i, j)) <= 1e-6 * std::max(std::abs(fd), 1e-3));
    }
  }
}

TEST_CASE("backward: zero upstream gradient and blocked identity mapping") {
  auto pr = gradcheck::make_problem(Variant::deep_hgcn, 3, 7);
  Rng drop = Rng(pr.dropout_seed).stream("dropout");
  auto fwd = model_forward(pr.params, pr.p, pr.x, pr.config, Mode::train, &drop);
  ModelConfig no_wd = pr.config;
  no_wd.weight_decay = 0.0;
  auto zero = model_backward(fwd.tape, DenseMatrix(fwd.logits.rows(), fwd.logits.cols()), pr.params, pr.p, no_wd);
  for (std::size_t t = 0; t < zero.tensor_count(); ++t) CHECK(max_abs(zero.tensor(t)) == 0.0);

  ModelConfig beta0 = no_wd;
  beta0.lambda_id = 0.0;
  Rng drop2 = Rng(pr.dropout_seed).stream("dropout");
  auto f0 = model_forward(pr.params, pr.p, pr.x, beta0, Mode::train, &drop2);
  auto ce = cross_entropy_masked(f0.logits, pr.labels, pr.mask);
  auto g = model_backward(f0.tape, ce.grad_logits, pr.params, pr.p, beta0);
  for (const auto& w : g.layer_weights) CHECK(max_abs(w) == 0.0);
  CHECK(max_abs(g.theta_in) > 0.0);
}

TEST_CASE("backward agrees with central finite differences") {
  for (Variant v : {Variant::deep_hgcn, Variant::hgnn, Variant::shgcn, Variant::mlp}) {
    for (std::size_t layers : {1, 3}) {
      auto pr = gradcheck::make_problem(v, layers, 11 + layers);
      for (const auto& e : gradcheck::check(pr)) {
        INFO(to_string(v), " K=", layers, " ", e.name);
        CHECK(e.rel_error <= 1e-4);
      }
    }
  }
}

TEST_CASE("backward rejects a stale tape") {
  auto pr = gradcheck::make_problem(Variant::hgnn, 2, 3, 0.0);
  auto fwd = model_forward(pr.params, pr.p, pr.x, pr.config, Mode::eval);
  ModelConfig other = pr.config;
  other.num_layers = 3;
  auto bigger = init_params(other, 5, 3, Rng(0));
  CHECK_THROWS_AS(model_backward(fwd.tape, fwd.logits, bigger, pr.p, other), DimensionError);
}

TEST_CASE("adam") {
  ModelConfig c;
  c.hidden_dim = 3;
  auto params = init_params(c, 2, 2, Rng(0));
  auto before = params;
  AdamState st(params);
  adam_step(params, params.zeros_like(), st, 0.01);
  for (std::size_t t = 0; t < params.tensor_count(); ++t) CHECK(params.tensor(t) == before.tensor(t));

  auto grads = params.zeros_like();
  for (std::size_t t = 0; t < grads.tensor_count(); ++t) {
    for (double& v : grads.tensor(t).values()) v = 0.7;
  }
  AdamState st2(before);
  auto p2 = before;
  adam_step(p2, grads, st2, 0.01);
  for (std::size_t t = 0; t < p2.tensor_count(); ++t) {
    for (std::size_t i = 0; i < p2.tensor(t).size(); ++i) {
      CHECK(before.tensor(t).values()[i] - p2.tensor(t).values()[i] == doctest::Approx(0.01).epsilon(1e-6));
    }
  }

  // Quadratic bowl 0.5 ||W - target||^2 on the input weights.
  auto w = init_params(c, 2, 2, Rng(1));
  AdamState st3(w);
  auto target = w.theta_in;
  target *= -3.0;
  auto bowl = [&](const ModelParams& m) {
    double s = 0;
    for (std::size_t i = 0; i < m.theta_in.size(); ++i) {
      double d = m.theta_in.values()[i] - target.values()[i];
      s += 0.5 * d * d;
    }
    return s;
  };
  double prev = bowl(w);
  int increases = 0;
  for (int step = 0; step < 100; ++step) {
    auto gr = w.zeros_like();
    gr.theta_in = w.theta_in - target;
    adam_step(w, gr, st3, 0.01);
    double cur = bowl(w);
    if (step >= 5 && cur >= prev) ++increases;
    prev = cur;
  }
  CHECK(increases == 0);
}

TEST_CASE("glorot initialisation") {
  ModelConfig c;
  c.num_layers = 2;
  c.hidden_dim = 500;
  auto a = init_params(c, 500, 3, Rng(9));
  auto b = init_params(c, 500, 3, Rng(9));
  for (std::size_t t = 0; t < a.tensor_count(); ++t) CHECK(a.tensor(t) == b.tensor(t));
  const double bound = std::sqrt(6.0 / 1000.0);
  for (double v : a.theta_in.values()) CHECK(std::abs(v) <= bound);
  // Column variance of the 500x500 hidden weights against 2 / (fan_in + fan_out).
  const auto& w = a.layer_weights[0];
  const double want = 2.0 / 1000.0;
  for (std::size_t j = 0; j < w.cols(); j += 50) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < w.rows(); ++i) mean += w(i, j);
    mean /= static_cast<double>(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) var += (w(i, j) - mean) * (w(i, j) - mean);
    var /= static_cast<double>(w.rows() - 1);
    CHECK(var < 3 * want);
    CHECK(var > want / 3);
  }
  c.variant = Variant::shgcn;
  CHECK(init_params(c, 4, 2, Rng(0)).layer_weights.empty());
}

TEST_CASE("config validation names the field") {
  ModelConfig c;
  c.num_layers = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("layers"), ConfigError);
  c = ModelConfig{};
  c.alpha = 1.5;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("alpha"), ConfigError);
  c = ModelConfig{};
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_variant("deep-hgcn") == Variant::deep_hgcn);
  CHECK_THROWS_AS(parse_variant("gat"), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig c;
  c.num_layers = 3;
  c.hidden_dim = 4;
  Checkpoint ck{Variant::hgnn, 3, 4, 5, 2, init_params(c, 5, 2, Rng(3))};
  std::stringstream ss;
  write_checkpoint(ss, ck);
  std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "HGCN");
  CHECK(bytes.size() == 4 + 6 * 4 + 8 * (5 * 4 + 3 * 16 + 4 * 2));
  std::stringstream in(bytes);
  auto back = read_checkpoint(in);
  CHECK(back.variant == Variant::hgnn);
  CHECK(back.num_layers == 3);
  for (std::size_t t = 0; t < ck.params.tensor_count(); ++t) CHECK(back.params.tensor(t) == ck.params.tensor(t));
  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_checkpoint(bad), DataError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), DataError);
}

TEST_CASE("single precision rounds activations") {
  auto pr = gradcheck::make_problem(Variant::deep_hgcn, 2, 4, 0.0);
  ModelConfig c = pr.config;
  c.precision = Precision::f32;
  auto out = model_forward(pr.params, pr.p, pr.x, c, Mode::eval);
  for (double v : out.logits.values()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
  auto ref = model_forward(pr.params, pr.p, pr.x, pr.config, Mode::eval);
  CHECK(max_abs_diff(out.logits, ref.logits) < 1e-4);
}
