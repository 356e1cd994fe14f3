#include <doctest.h>

#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include "hgx/errors.hpp"
#include "hgx/format.hpp"
#include "hgx/hypergraph.hpp"
#include "hgx/linalg.hpp"
#include "hgx/rng.hpp"
#include "oracles.hpp"

using namespace hgx;

namespace {

SparseMatrix random_sparse(Rng& rng, std::size_t r, std::size_t c, double density) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (rng.uniform() < density) t.push_back({i, j, rng.normal()});
    }
  }
  return SparseMatrix::from_triplets(r, c, std::move(t));
}

}  // namespace

TEST_CASE("sparse storage keeps sorted columns, sums duplicates and drops zeros") {
  auto s = SparseMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 0, 3.0}, {0, 1, -2.0}, {1, 2, 0.5}});
  CHECK(s.nnz() == 2);
  CHECK(s.at(0, 1) == 0.0);
  CHECK(s.at(1, 2) == 1.5);
  CHECK(s.at(1, 0) == 3.0);
  auto cols = s.col_indices();
  auto off = s.row_offsets();
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t k = off[i] + 1; k < off[i + 1]; ++k) CHECK(cols[k - 1] < cols[k]);
  }
  for (double v : s.values()) CHECK(v != 0.0);
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), DimensionError);
}

TEST_CASE("spmm with identity returns the dense operand") {
  Rng rng(1);
  DenseMatrix d = oracle::to_dense(oracle::random_mat(rng, 5, 3));
  CHECK(spmm(SparseMatrix::identity(5), d) == d);
}

TEST_CASE("spmm on the three-node chain propagation matrix") {
  // Closed-form entries: diagonal 1/2, neighbours 1/(2 sqrt 2).
  const double a = 0.5, b = 0.5 / std::sqrt(2.0);
  auto p = SparseMatrix::from_dense(DenseMatrix{{a, b, 0}, {b, a, b}, {0, b, a}});
  auto y = spmm(p, DenseMatrix(3, 1, 1.0));
  CHECK(y(0, 0) == doctest::Approx(0.85355).epsilon(1e-5));
  CHECK(y(1, 0) == doctest::Approx(1.20711).epsilon(1e-5));
  CHECK(y(2, 0) == doctest::Approx(0.85355).epsilon(1e-5));
}

TEST_CASE("spmm agrees with the densified product on random pairs") {
  Rng rng(2);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::size_t r = 1 + rng.below(12), k = 1 + rng.below(12), c = 1 + rng.below(5);
    SparseMatrix s = random_sparse(rng, r, k, rng.uniform(0.05, 0.8));
    auto dm = oracle::random_mat(rng, k, c);
    auto want = oracle::mul(oracle::from(s.to_dense()), dm);
    worst = std::max(worst, oracle::max_abs_diff(oracle::from(spmm(s, oracle::to_dense(dm))), want));
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(spmm(SparseMatrix::identity(3), DenseMatrix(2, 2)), DimensionError);
}

TEST_CASE("dense products and transposes match the naive oracle") {
  Rng rng(3);
  auto a = oracle::random_mat(rng, 4, 6), b = oracle::random_mat(rng, 6, 3), c = oracle::random_mat(rng, 4, 3);
  auto A = oracle::to_dense(a), B = oracle::to_dense(b), C = oracle::to_dense(c);
  CHECK(oracle::max_abs_diff(oracle::from(matmul(A, B)), oracle::mul(a, b)) < 1e-12);
  CHECK(oracle::max_abs_diff(oracle::from(matmul_tn(A, C)), oracle::mul(oracle::transpose(a), c)) < 1e-12);
  auto x = oracle::random_mat(rng, 5, 3);
  CHECK(oracle::max_abs_diff(oracle::from(matmul_nt(C, oracle::to_dense(x))), oracle::mul(c, oracle::transpose(x))) <
        1e-12);
  CHECK(transpose(transpose(A)) == A);
  CHECK_THROWS_AS(matmul(A, A), DimensionError);
  CHECK(trace(DenseMatrix{{1, 2}, {3, 4}}) == 5.0);
  CHECK(frobenius_norm(DenseMatrix{{3, 4}}) == 5.0);
}

TEST_CASE("sparse transpose and addition") {
  Rng rng(4);
  auto s = random_sparse(rng, 5, 7, 0.4);
  CHECK(s.transpose().to_dense() == transpose(s.to_dense()));
  auto t = random_sparse(rng, 5, 7, 0.4);
  CHECK(max_abs_diff(s.added(t, -2.0).to_dense(), s.to_dense() - 2.0 * t.to_dense()) < 1e-15);
}

TEST_CASE("symmetric_eigen on a diagonal matrix") {
  auto e = symmetric_eigen(DenseMatrix{{3, 0, 0}, {0, 1, 0}, {0, 0, 2}});
  REQUIRE(e.values.size() == 3);
  CHECK(e.values[0] == doctest::Approx(1.0));
  CHECK(e.values[1] == doctest::Approx(2.0));
  CHECK(e.values[2] == doctest::Approx(3.0));
}

TEST_CASE("symmetric_eigen: chain Laplacian has a zero eigenvalue") {
  auto g = Hypergraph::build(3, {{0, 1}, {1, 2}});
  auto e = symmetric_eigen(laplacian(g).to_dense());
  CHECK(std::abs(e.values[0]) < 1e-10);
  // The characteristic polynomial of the chain Laplacian is x(x - 1/2)(x - 1).
  CHECK(e.values[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(e.values[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("symmetric_eigen reconstructs random symmetric matrices") {
  Rng rng(5);
  const double tol = 1e-10;
  for (int t = 0; t < 5; ++t) {
    const std::size_t n = 20;
    auto m = oracle::random_mat(rng, n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) m[j][i] = m[i][j];
    }
    auto e = symmetric_eigen(oracle::to_dense(m), tol);
    CHECK(std::is_sorted(e.values.begin(), e.values.end()));
    auto v = oracle::from(e.vectors);
    auto lam = oracle::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) lam[i][i] = e.values[i];
    auto rec = oracle::mul(oracle::mul(v, lam), oracle::transpose(v));
    CHECK(oracle::max_abs_diff(rec, m) < 1e-8);
    CHECK(oracle::max_abs_diff(rec, m) < 100 * tol * std::max(1.0, frobenius_norm(oracle::to_dense(m))));
    CHECK(oracle::max_abs_diff(oracle::mul(oracle::transpose(v), v), oracle::identity(n)) < 10 * tol);
    double sum = 0, tr = 0;
    for (double x : e.values) sum += x;
    for (std::size_t i = 0; i < n; ++i) tr += m[i][i];
    CHECK(std::abs(sum - tr) <= 1e-8 * std::max(1.0, std::abs(tr)));
  }
}

TEST_CASE("symmetric_eigen errors") {
  CHECK_THROWS_AS(symmetric_eigen(DenseMatrix{{1, 2}, {0, 1}}), DataError);
  CHECK_THROWS_AS(symmetric_eigen(DenseMatrix(2, 3)), DimensionError);
  CHECK_THROWS_AS(symmetric_eigen(DenseMatrix::identity(5), 1e-10, 4), ConfigError);
}

TEST_CASE("max_singular_value") {
  CHECK(max_singular_value(DenseMatrix::identity(4)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(max_singular_value(DenseMatrix{{2, 0}, {0, 0.5}}) == doctest::Approx(2.0).epsilon(1e-12));
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    auto m = oracle::random_mat(rng, 8, 8);
    double want = std::sqrt(oracle::power_iteration(oracle::mul(oracle::transpose(m), m)));
    CHECK(std::abs(max_singular_value(oracle::to_dense(m)) - want) <= 1e-6 * want);
  }
}

TEST_CASE("activations") {
  DenseMatrix x{{-1, 2}};
  CHECK(elementwise_activation(x, Activation::relu()) == DenseMatrix{{0, 2}});
  auto l = elementwise_activation(x, Activation::leaky_relu(0.01));
  CHECK(l(0, 0) == doctest::Approx(-0.01));
  CHECK(l(0, 1) == 2.0);
  CHECK(elementwise_activation(x, Activation::identity()) == x);
  Rng rng(7);
  auto r = oracle::to_dense(oracle::random_mat(rng, 6, 6));
  auto once = elementwise_activation(r, Activation::relu());
  CHECK(elementwise_activation(once, Activation::relu()) == once);
}

TEST_CASE("row_softmax") {
  auto s = row_softmax(DenseMatrix{{0, 0}});
  CHECK(s(0, 0) == 0.5);
  CHECK(s(0, 1) == 0.5);
  auto big = row_softmax(DenseMatrix{{1000, 1000}});
  CHECK(big(0, 0) == 0.5);
  CHECK(big(0, 1) == 0.5);
  Rng rng(8);
  auto m = oracle::random_mat(rng, 5, 4);
  auto got = row_softmax(oracle::to_dense(m));
  for (std::size_t i = 0; i < 5; ++i) {
    double z = 0;
    for (double v : m[i]) z += std::exp(v);
    double rs = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(got(i, j) - std::exp(m[i][j]) / z) < 1e-12);
      rs += got(i, j);
    }
    CHECK(std::abs(rs - 1.0) < 1e-12);
  }
}

TEST_CASE("rng is reproducible and streams are independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng s1 = Rng(42).stream("x"), s2 = Rng(42).stream("x"), s3 = Rng(42).stream("y");
  CHECK(s1.next_u64() == s2.next_u64());
  CHECK(Rng(42).stream("x").next_u64() != s3.next_u64());
  CHECK(Rng(42).stream(std::uint64_t{1}).next_u64() != Rng(42).stream(std::uint64_t{2}).next_u64());

  Rng r(9);
  double mean = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double z = r.normal();
    mean += z;
    sq += z * z;
  }
  mean /= n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);

  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(7) < 7);
  }
  auto pick = r.sample_without_replacement(10, 10);
  CHECK(std::set<std::size_t>(pick.begin(), pick.end()).size() == 10);
}

TEST_CASE("format_double round-trips") {
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(40)) - 20);
    std::string s = format_double(v);
    double back = 0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}
