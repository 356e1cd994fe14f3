#include "hgx/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hgx/errors.hpp"
#include "hgx/format.hpp"

namespace hgx {

namespace {

void require_connected(const Hypergraph& g, const char* op) {
  if (!is_connected(g)) {
    throw DisconnectedError(std::string(op) + ": hypergraph is disconnected; the stationary state is not unique");
  }
}

// C(k, j) as double via the multiplicative formula; exact for the small k used here.
double binomial(std::size_t k, std::size_t j) {
  if (j > k) return 0.0;
  j = std::min(j, k - j);
  double r = 1.0;
  for (std::size_t i = 1; i <= j; ++i) r = r * static_cast<double>(k - j + i) / static_cast<double>(i);
  return std::round(r);
}

}  // namespace

std::vector<double> stationary_distribution_T(const Hypergraph& g) {
  require_connected(g, "stationary_distribution_T");
  std::vector<double> pi(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) pi[v] = g.node_degrees()[v] / g.volume();
  return pi;
}

std::vector<double> stationary_distribution_P(const Hypergraph& g) {
  require_connected(g, "stationary_distribution_P");
  std::vector<double> pi(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) pi[v] = std::sqrt(g.node_degrees()[v]) / g.volume();
  return pi;
}

DenseMatrix smoothing_limit(const Hypergraph& g, const DenseMatrix& x) {
  if (x.rows() != g.num_nodes()) throw DimensionError("smoothing_limit: feature rows != num_nodes");
  const auto pi = stationary_distribution_P(g);
  std::vector<double> weighted_sum(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double s = std::sqrt(g.node_degrees()[i]);
    const auto r = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) weighted_sum[j] += s * r[j];
  }
  DenseMatrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = weighted_sum[j] * pi[i];
  }
  return out;
}

DenseMatrix power_smooth(const SparseMatrix& p, const DenseMatrix& x, std::size_t l) {
  if (p.cols() != x.rows()) throw DimensionError("power_smooth: dimension mismatch");
  DenseMatrix cur = x;
  for (std::size_t k = 0; k < l; ++k) cur = spmm(p, cur);
  return cur;
}

double dirichlet_energy(const SparseMatrix& delta, const DenseMatrix& x) {
  if (delta.rows() != x.rows() || delta.cols() != x.rows()) {
    throw DimensionError("dirichlet_energy: Laplacian is " + std::to_string(delta.rows()) + "x" +
                         std::to_string(delta.cols()) + " but X has " + std::to_string(x.rows()) + " rows");
  }
  const DenseMatrix dx = spmm(delta, x);
  double e = 0.0;
  const auto a = x.values();
  const auto b = dx.values();
  for (std::size_t k = 0; k < a.size(); ++k) e += a[k] * b[k];
  return e;
}

double dirichlet_energy_sum(const Hypergraph& g, const DenseMatrix& x) {
  if (x.rows() != g.num_nodes()) throw DimensionError("dirichlet_energy_sum: feature rows != num_nodes");
  std::vector<double> inv_sqrt(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) inv_sqrt[v] = 1.0 / std::sqrt(g.node_degrees()[v]);

  double total = 0.0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto members = g.edge(e);
    const double coef = g.edge_weight(e) / static_cast<double>(members.size());
    double edge_sum = 0.0;
    for (NodeId u : members) {
      for (NodeId v : members) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
          const double diff = x(u, j) * inv_sqrt[u] - x(v, j) * inv_sqrt[v];
          edge_sum += diff * diff;
        }
      }
    }
    total += 0.5 * coef * edge_sum;
  }
  return total;
}

double min_nonzero_eigenvalue(const SparseMatrix& delta, std::size_t cap) {
  const auto eig = symmetric_eigen(delta.to_dense(), 1e-10, cap);
  for (double v : eig.values) {
    if (v > kNonzeroEigenThreshold) return v;
  }
  throw NumericalError("min_nonzero_eigenvalue: every eigenvalue is below " +
                       format_double(kNonzeroEigenThreshold));
}

// ---------------------------------------------------------------------------

PolynomialFilter::PolynomialFilter(std::vector<double> coefficients) : coefficients_(std::move(coefficients)) {
  if (coefficients_.empty()) throw ConfigError("PolynomialFilter: needs at least one coefficient");
  for (double c : coefficients_) {
    if (!std::isfinite(c)) throw ConfigError("PolynomialFilter: coefficients must be finite");
  }
}

std::vector<double> apply_polynomial_filter(const PolynomialFilter& f, const SparseMatrix& delta,
                                            std::span<const double> x) {
  if (delta.cols() != x.size() || delta.rows() != x.size()) {
    throw DimensionError("apply_polynomial_filter: dimension mismatch");
  }
  const auto theta = f.coefficients();
  // y = theta_K x; y = Δ y + theta_k x for k = K-1..0.
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = theta.back() * x[i];
  for (std::size_t k = theta.size() - 1; k-- > 0;) {
    y = spmv(delta, y);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += theta[k] * x[i];
  }
  return y;
}

std::vector<double> cumulative_products(std::span<const double> gamma) {
  const std::size_t k = gamma.size();
  std::vector<double> c(k);
  double acc = 1.0;
  for (std::size_t j = 0; j < k; ++j) {
    acc *= gamma[k - 1 - j];
    c[j] = acc;
  }
  return c;
}

std::vector<double> power_basis_coefficients(const PolynomialFilter& f) {
  const auto theta = f.coefficients();
  const std::size_t n = theta.size();
  std::vector<double> a(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = j; k < n; ++k) s += theta[k] * binomial(k, j);
    a[j] = (j % 2 == 0) ? s : -s;
  }
  return a;
}

PolynomialFilter theta_from_gamma(std::span<const double> gamma) {
  if (gamma.empty()) throw ConfigError("theta_from_gamma: gamma is empty");
  const auto c = cumulative_products(gamma);
  // P^j = (I - Δ)^j = sum_m (-1)^m C(j, m) Δ^m.
  std::vector<double> theta(c.size(), 0.0);
  for (std::size_t m = 0; m < c.size(); ++m) {
    double s = 0.0;
    for (std::size_t j = m; j < c.size(); ++j) s += c[j] * binomial(j, m);
    theta[m] = (m % 2 == 0) ? s : -s;
  }
  return PolynomialFilter(std::move(theta));
}

GammaSolution gamma_from_theta(const PolynomialFilter& f) {
  GammaSolution sol;
  sol.products = power_basis_coefficients(f);
  const std::size_t k = sol.products.size();
  sol.gamma.assign(k, 0.0);
  sol.gamma[k - 1] = sol.products[0];
  for (std::size_t j = 1; j < k; ++j) {
    const double prev = sol.products[j - 1];
    if (prev != 0.0) {
      sol.gamma[k - 1 - j] = sol.products[j] / prev;
      continue;
    }
    // A zero product forces every later product to zero.
    const bool rest_zero = std::all_of(sol.products.begin() + static_cast<std::ptrdiff_t>(j), sol.products.end(),
                                       [](double v) { return v == 0.0; });
    if (rest_zero) {
      for (std::size_t r = j; r < k; ++r) sol.gamma[k - 1 - r] = 0.0;
      break;
    }
    sol.degenerate = true;
    sol.zero_pivot = j - 1;
    sol.message = "gamma_from_theta: cumulative product c_" + std::to_string(j - 1) +
                  " is zero but a higher-order coefficient is not; the filter is outside the reduced recursion's "
                  "reach";
    break;
  }
  return sol;
}

std::vector<double> gamma_closed_form(const PolynomialFilter& f) {
  const auto theta = f.coefficients();
  const std::size_t k = theta.size();
  auto alternating_sum = [&](std::size_t l) {
    double s = 0.0;
    for (std::size_t i = l; i < k; ++i) s += theta[i] * binomial(i, l);
    return (l % 2 == 0) ? s : -s;
  };
  std::vector<double> gamma(k);
  double last = 0.0;
  for (double t : theta) last += t;
  gamma[k - 1] = last;
  for (std::size_t l = 1; l < k; ++l) gamma[k - l - 1] = alternating_sum(l) / alternating_sum(l - 1);
  return gamma;
}

std::vector<double> reduced_deep_recursion(std::span<const double> gamma, const SparseMatrix& p,
                                           std::span<const double> x) {
  if (p.rows() != x.size()) throw DimensionError("reduced_deep_recursion: dimension mismatch");
  std::vector<double> s(x.size(), 0.0);
  for (double g : gamma) {
    auto ps = spmv(p, s);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = g * (ps[i] + x[i]);
  }
  return s;
}

std::vector<double> apply_power_series(std::span<const double> products, const SparseMatrix& p,
                                       std::span<const double> x) {
  if (p.rows() != x.size()) throw DimensionError("apply_power_series: dimension mismatch");
  std::vector<double> y(x.size(), 0.0);
  std::vector<double> pj(x.begin(), x.end());
  for (std::size_t j = 0; j < products.size(); ++j) {
    if (j > 0) pj = spmv(p, pj);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += products[j] * pj[i];
  }
  return y;
}

// ---------------------------------------------------------------------------

ContractionReport energy_contraction_check(const Hypergraph& g, const DenseMatrix& x,
                                           std::span<const DenseMatrix> thetas, Activation act) {
  const SparseMatrix p = propagation_matrix(g);
  const SparseMatrix delta = laplacian(g);

  ContractionReport rep;
  rep.lambda_min = min_nonzero_eigenvalue(delta);
  rep.lambda_bar = (1.0 - rep.lambda_min) * (1.0 - rep.lambda_min);
  rep.initial_energy = dirichlet_energy(delta, x);

  DenseMatrix cur = x;
  double prev = rep.initial_energy;
  double cumulative = 1.0;
  for (std::size_t l = 0; l < thetas.size(); ++l) {
    const double norm_sq = std::pow(max_singular_value(thetas[l]), 2);
    cumulative *= norm_sq;
    cur = elementwise_activation(matmul(spmm(p, cur), thetas[l]), act);

    ContractionLayer row;
    row.layer = l + 1;
    row.energy = dirichlet_energy(delta, cur);
    row.prev_energy = prev;
    row.theta_norm_sq = norm_sq;
    row.bound = norm_sq * rep.lambda_bar * prev;
    row.product_bound = cumulative * rep.lambda_bar * prev;
    const double floor = 1e-12 * std::max(rep.initial_energy, 1e-300);
    row.violated = row.energy > row.bound * (1.0 + kContractionSlack) + floor;
    row.product_violated = row.energy > row.product_bound * (1.0 + kContractionSlack) + floor;
    rep.violations += row.violated ? 1 : 0;
    rep.product_violations += row.product_violated ? 1 : 0;
    rep.layers.push_back(row);
    prev = row.energy;
  }
  rep.final_over_initial = rep.initial_energy > 0.0 ? prev / rep.initial_energy : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------

std::string EnergyTrace::to_csv() const {
  std::ostringstream os;
  os << "layer,dirichlet_energy,distance_to_stationary\n";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    os << layers[i] << ',' << format_double(energies[i]) << ',';
    if (i < distances.size()) os << format_double(distances[i]);
    os << '\n';
  }
  return os.str();
}

double relative_distance_to_stationary(const Hypergraph& g, const DenseMatrix& x) {
  const double scale = max_abs(x);
  if (scale == 0.0) return 0.0;
  return max_abs_diff(x, smoothing_limit(g, x)) / scale;
}

}  // namespace hgx
