#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgx/hypergraph.hpp"
#include "hgx/linalg.hpp"

namespace hgx {

/// pi(v) = d(v) / vol. Left fixed point of the transition matrix T.
/// Throws DisconnectedError unless the hypergraph is connected.
std::vector<double> stationary_distribution_T(const Hypergraph& g);

/// pi~(v) = sqrt(d(v)) / vol. Fixed point of the propagation matrix P.
/// Throws DisconnectedError unless the hypergraph is connected.
std::vector<double> stationary_distribution_P(const Hypergraph& g);

/// Limit of P^l X as l grows, for a connected hypergraph.
///
/// P is symmetric with simple top eigenvalue 1 and eigenvector
/// u = D_v^{1/2} 1 / sqrt(vol), so P^l -> u uᵀ and column j of the limit is
/// (sum_i sqrt(d(i)) x_ij) * pi~ᵀ. On graphs where every node has unit degree
/// this reduces to the plain column sum times pi~ᵀ.
DenseMatrix smoothing_limit(const Hypergraph& g, const DenseMatrix& x);

/// P^l X by repeated spmm.
DenseMatrix power_smooth(const SparseMatrix& p, const DenseMatrix& x, std::size_t l);

/// tr(Xᵀ Δ X). Non-negative up to rounding for a genuine Laplacian.
double dirichlet_energy(const SparseMatrix& delta, const DenseMatrix& x);

/// 1/2 sum_e sum_{u,v in e} w(e)/delta(e) (f(u)/sqrt(d(u)) - f(v)/sqrt(d(v)))^2,
/// summed over the columns f of X. The inner sum runs over ordered pairs.
/// Evaluated pairwise, independent of the Laplacian matrix.
double dirichlet_energy_sum(const Hypergraph& g, const DenseMatrix& x);

inline constexpr double kNonzeroEigenThreshold = 1e-8;

/// Smallest eigenvalue of Δ above kNonzeroEigenThreshold (dense Jacobi).
/// Throws NumericalError when every eigenvalue is below the threshold.
double min_nonzero_eigenvalue(const SparseMatrix& delta, std::size_t cap = kDefaultEigenCap);

/// Coefficients theta_0..theta_K of sum_k theta_k Δ^k.
class PolynomialFilter {
 public:
  explicit PolynomialFilter(std::vector<double> coefficients);

  std::span<const double> coefficients() const { return coefficients_; }
  std::size_t size() const { return coefficients_.size(); }
  std::size_t order() const { return coefficients_.size() - 1; }

 private:
  std::vector<double> coefficients_;
};

/// (sum_k theta_k Δ^k) x, Horner form.
std::vector<double> apply_polynomial_filter(const PolynomialFilter& f, const SparseMatrix& delta,
                                            std::span<const double> x);

// ---------------------------------------------------------------------------
// Filter expressiveness of the reduced Deep-HGCN recursion.
//
// With alpha fixed at 1/2 and each layer weight fixed to a scalar multiple of
// the identity (the 1/2 absorbed into the scalar), K layers reduce to
//
//   s_0 = 0,   s_{l+1} = gamma_l (P s_l + x),   l = 0..K-1,
//
// whose output is s_K = sum_{j=0}^{K-1} c_j P^j x with cumulative products
// c_j = gamma_{K-1} gamma_{K-2} ... gamma_{K-1-j}. Expanding a filter in Δ
// into powers of P = I - Δ gives c_j = (-1)^j sum_{k>=j} theta_k C(k, j), so a
// K-coefficient filter is matched by K layers.

/// c_j from gamma (length K).
std::vector<double> cumulative_products(std::span<const double> gamma);

/// Coefficients in powers of P: a_j = (-1)^j sum_{k>=j} theta_k C(k, j).
std::vector<double> power_basis_coefficients(const PolynomialFilter& f);

/// Inverse of power_basis_coefficients applied to cumulative_products(gamma).
PolynomialFilter theta_from_gamma(std::span<const double> gamma);

struct GammaSolution {
  std::vector<double> gamma;     // length K; valid only when !degenerate
  std::vector<double> products;  // required c_j, always filled
  bool degenerate = false;
  std::optional<std::size_t> zero_pivot;  // first j whose c_j is zero while a later one is not
  std::string message;
};

/// Solves for gamma by dividing consecutive cumulative products.
///
/// When some c_j is zero the ratios are undefined. If every later product is
/// also zero the system is still solvable (the remaining gammas are set to 0);
/// otherwise the filter is not reachable by the recursion and the result is
/// flagged degenerate with the products left for evaluation through
/// apply_power_series.
GammaSolution gamma_from_theta(const PolynomialFilter& f);

/// Closed-form ratio of alternating binomial sums for gamma_{K-1-l}, taken
/// as the literal division without zero handling. Used to cross-check
/// gamma_from_theta on non-degenerate filters.
std::vector<double> gamma_closed_form(const PolynomialFilter& f);

/// Runs the reduced recursion s_{l+1} = gamma_l (P s_l + x) from s_0 = 0.
std::vector<double> reduced_deep_recursion(std::span<const double> gamma, const SparseMatrix& p,
                                           std::span<const double> x);

/// sum_j c_j P^j x.
std::vector<double> apply_power_series(std::span<const double> products, const SparseMatrix& p,
                                       std::span<const double> x);

// ---------------------------------------------------------------------------
// Energy contraction through an HGNN stack X^(l) = act(P X^(l-1) Θ^(l-1)).

struct ContractionLayer {
  std::size_t layer = 0;
  double energy = 0.0;         // E(X^(l))
  double prev_energy = 0.0;    // E(X^(l-1))
  double theta_norm_sq = 0.0;  // ||Θ^(l-1)||_2^2
  // ||Θ^(l-1)||^2 (1-λ)^2 E(X^(l-1)); the bound obtained by chaining the
  // three single-operator contraction results.
  double bound = 0.0;
  // prod_{k<l} ||Θ^(k)||^2 (1-λ)^2 E(X^(l-1)); the cumulative-product form.
  double product_bound = 0.0;
  bool violated = false;
  bool product_violated = false;
};

struct ContractionReport {
  double lambda_min = 0.0;  // smallest nonzero eigenvalue of Δ
  double lambda_bar = 0.0;  // (1 - lambda_min)^2
  double initial_energy = 0.0;
  std::vector<ContractionLayer> layers;
  std::size_t violations = 0;
  std::size_t product_violations = 0;
  double final_over_initial = 0.0;  // 0 when the initial energy is 0
};

inline constexpr double kContractionSlack = 1e-9;

/// Simulates the stack and checks every layer against both bounds with
/// relative slack kContractionSlack (absolute floor 1e-12 on the energy
/// scale).
ContractionReport energy_contraction_check(const Hypergraph& g, const DenseMatrix& x,
                                           std::span<const DenseMatrix> thetas,
                                           Activation act = Activation::relu());

// ---------------------------------------------------------------------------

struct EnergyTrace {
  std::vector<std::size_t> layers;
  std::vector<double> energies;
  // Empty when the hypergraph is disconnected.
  std::vector<double> distances;

  /// Header `layer,dirichlet_energy,distance_to_stationary`; the last field is
  /// left blank when no distances were recorded.
  std::string to_csv() const;
};

/// ||X - smoothing_limit(X)||_max / ||X||_max, zero for X = 0.
double relative_distance_to_stationary(const Hypergraph& g, const DenseMatrix& x);

}  // namespace hgx
