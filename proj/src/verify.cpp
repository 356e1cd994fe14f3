#include "hgx/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hgx/format.hpp"
#include "hgx/linalg.hpp"
#include "hgx/spectral.hpp"

namespace hgx {

Hypergraph random_connected_hypergraph(Rng& rng, std::size_t n, std::size_t max_edge_size) {
  const std::size_t m = n + rng.below(n + 1);
  const std::size_t hi = std::max<std::size_t>(2, std::min(n, max_edge_size));
  std::vector<std::vector<NodeId>> edges;
  std::vector<double> weights;
  for (std::size_t e = 0; e < m; ++e) {
    std::size_t size = n == 1 ? 1 : 2 + rng.below(hi - 1);
    edges.push_back(rng.sample_without_replacement(n, std::min(size, n)));
    weights.push_back(rng.uniform(0.5, 2.0));
  }
  std::vector<char> covered(n, 0);
  for (const auto& e : edges) {
    for (NodeId v : e) covered[v] = 1;
  }
  for (NodeId v = 0; v < n; ++v) {
    if (covered[v]) continue;
    NodeId u = n == 1 ? v : (v + 1 + rng.below(n - 1)) % n;
    edges.push_back({v, u});
    weights.push_back(rng.uniform(0.5, 2.0));
  }
  Hypergraph g = Hypergraph::build(n, edges, weights);
  auto comp = connected_components(g);
  std::size_t num_comp = 1 + *std::max_element(comp.begin(), comp.end());
  if (num_comp == 1) return g;
  std::vector<NodeId> rep(num_comp, n);
  for (NodeId v = 0; v < n; ++v) {
    if (rep[comp[v]] == n) rep[comp[v]] = v;
  }
  for (std::size_t c = 1; c < num_comp; ++c) {
    edges.push_back({rep[0], rep[c]});
    weights.push_back(rng.uniform(0.5, 2.0));
  }
  return Hypergraph::build(n, std::move(edges), std::move(weights));
}

namespace {

DenseMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, bool non_negative = false) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = non_negative ? rng.uniform() : rng.normal();
  return m;
}

struct Ctx {
  const VerifyOptions& opt;
  Rng root;

  Rng trial(std::string_view check, std::size_t t) const { return root.stream(check).stream(std::uint64_t{t}); }

  std::size_t nodes(Rng& rng) const {
    const std::size_t lo = std::min<std::size_t>(4, opt.max_nodes);
    return lo + rng.below(opt.max_nodes - lo + 1);
  }

  SparseMatrix delta(const Hypergraph& g) const {
    SparseMatrix d = laplacian(g);
    if (!opt.corrupt_delta) return d;
    return d.added(SparseMatrix::from_triplets(g.num_nodes(), g.num_nodes(), {{0, 0, 1.0}}), -0.5);
  }
};

std::string fmt(double v) { return format_double(v); }

CheckResult check_lemma1(const Ctx& ctx) {
  CheckResult r{"lemma1", true, ctx.opt.trials, 0.0, 1e-12, ""};
  for (std::size_t t = 0; t < ctx.opt.trials; ++t) {
    Rng rng = ctx.trial("lemma1", t);
    Hypergraph g = random_connected_hypergraph(rng, ctx.nodes(rng));
    auto pi = stationary_distribution_P(g);
    // P is symmetric, so the row-vector product pi P equals P pi.
    auto moved = spmv(propagation_matrix(g), pi);
    double err = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) err = std::max(err, std::abs(moved[i] - pi[i]));
    r.worst = std::max(r.worst, err);
  }
  r.passed = r.worst < r.tolerance;
  r.detail = "max_v |(pi~ P - pi~)(v)|";
  return r;
}

CheckResult check_theorem1(const Ctx& ctx) {
  constexpr std::size_t kSteps = 500;
  CheckResult r{"theorem1", true, ctx.opt.trials, 0.0, 1e-6, ""};
  std::size_t non_monotone = 0;
  for (std::size_t t = 0; t < ctx.opt.trials; ++t) {
    Rng rng = ctx.trial("theorem1", t);
    Hypergraph g = random_connected_hypergraph(rng, ctx.nodes(rng));
    SparseMatrix p = propagation_matrix(g);
    DenseMatrix x = random_matrix(rng, g.num_nodes(), 1 + rng.below(4));
    DenseMatrix limit = smoothing_limit(g, x);
    // P is symmetric with spectrum in [0, 1], so the Frobenius distance to
    // the limit cannot grow from one step to the next.
    const double slack = 1e-12 * std::max(1.0, frobenius_norm(x));
    double prev = frobenius_norm(x - limit);
    DenseMatrix cur = x;
    for (std::size_t l = 1; l <= kSteps; ++l) {
      cur = spmm(p, cur);
      double d = frobenius_norm(cur - limit);
      if (d > prev + slack) ++non_monotone;
      prev = d;
    }
    r.worst = std::max(r.worst, max_abs_diff(cur, limit));
  }
  r.passed = r.worst < r.tolerance && non_monotone == 0;
  r.detail = "max |P^500 X - limit|, non-monotone steps " + std::to_string(non_monotone);
  return r;
}

CheckResult check_lemma2(const Ctx& ctx) {
  constexpr double kSlack = 1e-9;
  CheckResult r{"lemma2", true, 3 * ctx.opt.trials, 0.0, kSlack, ""};
  double worst[3] = {-INFINITY, -INFINITY, -INFINITY};
  for (std::size_t t = 0; t < ctx.opt.trials; ++t) {
    Rng rng = ctx.trial("lemma2", t);
    Hypergraph g = random_connected_hypergraph(rng, ctx.nodes(rng));
    SparseMatrix p = propagation_matrix(g);
    SparseMatrix delta = ctx.delta(g);
    const std::size_t d = 1 + rng.below(6);
    DenseMatrix x = random_matrix(rng, g.num_nodes(), d);
    const double ex = dirichlet_energy(delta, x);

    // (1) smoothing contracts by (1 - lambda_min)^2.
    double lam = min_nonzero_eigenvalue(delta);
    worst[0] = std::max(worst[0], dirichlet_energy(delta, spmm(p, x)) - (1 - lam) * (1 - lam) * ex);

    // (2) a weight matrix scales by at most its squared spectral norm.
    DenseMatrix theta = random_matrix(rng, d, 1 + rng.below(6));
    theta *= rng.uniform(0.1, 2.0);
    double s = max_singular_value(transpose(theta));
    worst[1] = std::max(worst[1], dirichlet_energy(delta, matmul(x, theta)) - s * s * ex);

    // (3) ReLU and leaky ReLU never raise the energy.
    for (Activation act : {Activation::relu(), Activation::leaky_relu(rng.uniform(0.01, 0.5))}) {
      worst[2] = std::max(worst[2], dirichlet_energy(delta, elementwise_activation(x, act)) - ex);
    }
  }
  r.worst = std::max({worst[0], worst[1], worst[2]});
  r.passed = r.worst <= kSlack;
  r.detail = "max excess over bound: smoothing " + fmt(worst[0]) + ", weight " + fmt(worst[1]) + ", activation " +
             fmt(worst[2]);
  return r;
}

std::vector<DenseMatrix> random_thetas(Rng& rng, std::size_t layers, std::size_t d, double norm) {
  std::vector<DenseMatrix> out;
  for (std::size_t l = 0; l < layers; ++l) {
    DenseMatrix th = random_matrix(rng, d, d);
    th *= norm / max_singular_value(th);
    out.push_back(std::move(th));
  }
  return out;
}

CheckResult check_theorem2(const Ctx& ctx) {
  CheckResult r{"theorem2", true, ctx.opt.trials, -INFINITY, kContractionSlack, ""};
  std::size_t violations = 0, product_violations = 0, layers_checked = 0;
  for (std::size_t t = 0; t < ctx.opt.trials; ++t) {
    Rng rng = ctx.trial("theorem2", t);
    Hypergraph g = random_connected_hypergraph(rng, ctx.nodes(rng));
    const std::size_t d = 2 + rng.below(5);
    DenseMatrix x = random_matrix(rng, g.num_nodes(), d);
    auto thetas = random_thetas(rng, 2 + rng.below(7), d, rng.uniform(0.3, 1.5));
    auto rep = energy_contraction_check(g, x, thetas);
    violations += rep.violations;
    product_violations += rep.product_violations;
    for (const auto& row : rep.layers) {
      ++layers_checked;
      double scale = std::max(row.bound, 1e-12 * rep.initial_energy);
      if (scale > 0.0) r.worst = std::max(r.worst, (row.energy - row.bound) / scale);
    }
  }
  r.passed = violations == 0;
  r.detail = "relative excess over the per-layer bound across " + std::to_string(layers_checked) +
             " layers; cumulative-product form exceeded on " + std::to_string(product_violations);
  return r;
}

CheckResult check_corollary21(const Ctx& ctx) {
  CheckResult r{"corollary2.1", true, ctx.opt.trials, 0.0, 1e-6, ""};
  std::size_t max_layers = 0;
  for (std::size_t t = 0; t < ctx.opt.trials; ++t) {
    Rng rng = ctx.trial("corollary2.1", t);
    Hypergraph g = random_connected_hypergraph(rng, ctx.nodes(rng));
    const std::size_t d = 2 + rng.below(5);
    DenseMatrix x = random_matrix(rng, g.num_nodes(), d);
    const double lam = min_nonzero_eigenvalue(laplacian(g));
    const double lambda_bar = (1 - lam) * (1 - lam);
    // Pick ||Θ||^2 so that s * lambda_bar = target < 1, then enough layers for
    // the guaranteed decay target^L to fall below 1e-7.
    const double target = rng.uniform(0.2, 0.9);
    const double norm = lambda_bar > 0 ? std::min(2.0, std::sqrt(target / lambda_bar)) : 1.0;
    const double rate = norm * norm * lambda_bar;
    const std::size_t layers =
        rate > 0 ? static_cast<std::size_t>(std::ceil(std::log(1e-7) / std::log(rate))) : std::size_t{1};
    max_layers = std::max(max_layers, layers);
    auto thetas = random_thetas(rng, layers, d, norm);
    auto rep = energy_contraction_check(g, x, thetas);
    r.worst = std::max(r.worst, rep.final_over_initial);
  }
  r.passed = r.worst < r.tolerance;
  r.detail = "max final/initial energy, stacks up to " + std::to_string(max_layers) + " layers";
  return r;
}

CheckResult check_theorem3(const Ctx& ctx) {
  CheckResult r{"theorem3", true, ctx.opt.trials, 0.0, 1e-8, ""};
  double worst_closed = 0.0;
  std::size_t degenerate = 0;
  for (std::size_t t = 0; t < ctx.opt.trials; ++t) {
    Rng rng = ctx.trial("theorem3", t);
    const std::size_t k = 1 + t % 9;  // filter orders 0..8
    std::vector<double> theta(k);
    for (double& v : theta) v = rng.uniform(-1.0, 1.0);
    PolynomialFilter f(theta);
    Hypergraph g = random_connected_hypergraph(rng, ctx.nodes(rng));
    SparseMatrix p = propagation_matrix(g);
    std::vector<double> x(g.num_nodes());
    for (double& v : x) v = rng.uniform();

    GammaSolution sol = gamma_from_theta(f);
    if (sol.degenerate) {
      ++degenerate;
      continue;
    }
    auto want = apply_polynomial_filter(f, laplacian(g), x);
    auto got = reduced_deep_recursion(sol.gamma, p, x);
    for (std::size_t i = 0; i < x.size(); ++i) r.worst = std::max(r.worst, std::abs(got[i] - want[i]));
    auto closed = gamma_closed_form(f);
    for (std::size_t i = 0; i < closed.size(); ++i) {
      double scale = std::max(1.0, std::abs(sol.gamma[i]));
      worst_closed = std::max(worst_closed, std::abs(closed[i] - sol.gamma[i]) / scale);
    }
  }
  r.passed = r.worst < r.tolerance && worst_closed < r.tolerance && degenerate == 0;
  r.detail = "max |recursion - filter|; closed-form gamma mismatch " + fmt(worst_closed) + "; degenerate " +
             std::to_string(degenerate);
  return r;
}

CheckResult check_dual_energy(const Ctx& ctx) {
  CheckResult r{"dual-energy", true, ctx.opt.trials, 0.0, 1e-9, ""};
  for (std::size_t t = 0; t < ctx.opt.trials; ++t) {
    Rng rng = ctx.trial("dual-energy", t);
    Hypergraph g = random_connected_hypergraph(rng, ctx.nodes(rng));
    DenseMatrix x = random_matrix(rng, g.num_nodes(), 1 + rng.below(6));
    double trace_form = dirichlet_energy(ctx.delta(g), x);
    double sum_form = dirichlet_energy_sum(g, x);
    double scale = std::max(std::abs(sum_form), 1e-300);
    r.worst = std::max(r.worst, std::abs(trace_form - sum_form) / scale);
  }
  r.passed = r.worst < r.tolerance;
  r.detail = "relative |trace form - pairwise sum|";
  return r;
}

}  // namespace

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string VerifyReport::to_text() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << "  trials=" << c.trials << " worst=" << fmt(c.worst)
       << " tol=" << fmt(c.tolerance) << "  (" << c.detail << ")\n";
  }
  return os.str();
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"passed", c.passed},
                   {"trials", c.trials},
                   {"worst", c.worst},
                   {"tolerance", c.tolerance},
                   {"detail", c.detail}});
  }
  return {{"checks", std::move(arr)}, {"all_passed", all_passed()}};
}

VerifyReport run_verification(const VerifyOptions& options) {
  Ctx ctx{options, Rng(options.seed)};
  VerifyReport rep;
  rep.checks.push_back(check_lemma1(ctx));
  rep.checks.push_back(check_theorem1(ctx));
  rep.checks.push_back(check_lemma2(ctx));
  rep.checks.push_back(check_theorem2(ctx));
  rep.checks.push_back(check_corollary21(ctx));
  rep.checks.push_back(check_theorem3(ctx));
  rep.checks.push_back(check_dual_energy(ctx));
  return rep;
}

}  // namespace hgx
