#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hgx {

/// Row-major dense real matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix column(std::span<const double> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double> col(std::size_t j) const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  DenseMatrix& operator+=(const DenseMatrix& o);
  DenseMatrix& operator-=(const DenseMatrix& o);
  DenseMatrix& operator*=(double s);

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix. Column indices are strictly increasing per
/// row and no explicit zeros are stored.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  // Duplicate (row, col) entries are summed; entries that end up exactly zero
  // are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static SparseMatrix from_dense(const DenseMatrix& d);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> row_offsets() const { return offsets_; }
  std::span<const std::size_t> col_indices() const { return indices_; }
  std::span<const double> values() const { return values_; }

  // Value at (i, j), zero when not stored. O(log row length).
  double at(std::size_t i, std::size_t j) const;

  DenseMatrix to_dense() const;
  SparseMatrix transpose() const;

  // Returns a copy with `scale * other` added (union of patterns).
  SparseMatrix added(const SparseMatrix& other, double scale = 1.0) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> indices_;
  std::vector<double> values_;
};

// Sparse-dense product. Each output row is accumulated in CSR order, so the
// result is bit-reproducible.
DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d);
std::vector<double> spmv(const SparseMatrix& s, std::span<const double> x);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// aᵀ·b without forming the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// a·bᵀ without forming the transpose.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);

double trace(const DenseMatrix& a);
double max_abs(const DenseMatrix& a);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
double frobenius_norm(const DenseMatrix& a);
double dot(std::span<const double> a, std::span<const double> b);

struct EigenDecomposition {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // column k pairs with values[k]
  int sweeps = 0;
};

inline constexpr std::size_t kDefaultEigenCap = 2000;

/// Cyclic Jacobi rotations on a dense symmetric matrix.
///
/// Iterates until the off-diagonal Frobenius norm drops below
/// `tol * max(1, ||a||_F)`. Throws DimensionError for non-square input,
/// DataError when `a` is not symmetric within `tol * max(1, max|a|)`,
/// ConfigError when `a.rows() > cap`, and NumericalError if 100 sweeps do
/// not converge.
EigenDecomposition symmetric_eigen(const DenseMatrix& a, double tol = 1e-10,
                                   std::size_t cap = kDefaultEigenCap);

/// Largest singular value, from the top eigenvalue of mᵀm.
double max_singular_value(const DenseMatrix& m);

enum class ActivationKind { relu, leaky_relu, identity };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double slope = 0.01;  // leaky_relu only

  static Activation relu() { return {ActivationKind::relu, 0.0}; }
  static Activation leaky_relu(double slope) { return {ActivationKind::leaky_relu, slope}; }
  static Activation identity() { return {ActivationKind::identity, 0.0}; }

  double apply(double x) const;
  // Derivative at x; at the kink the right-hand value is not used, x = 0 maps
  // to the left slope.
  double derivative(double x) const;
};

DenseMatrix elementwise_activation(const DenseMatrix& x, Activation act);

/// Row-wise softmax with per-row max subtraction.
DenseMatrix row_softmax(const DenseMatrix& x);

// Round every entry through float. Used to emulate 32-bit training.
void round_to_float(DenseMatrix& m);

}  // namespace hgx
