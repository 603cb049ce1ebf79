#pragma once

// Dense row-major linear algebra in 64-bit floating point.
//
// Kernels that are worth parallelizing come in two flavours: a plain serial
// reference (suffix `_reference`) kept for testing, and the OpenMP version
// used by the rest of the library. Both must agree to rounding.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace imaginet {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t dim() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  void fill(double value);

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  /// Builds from nested rows; every row must have the same length.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  Vector column(std::size_t c) const;
  Matrix transpose() const;
  void fill(double value);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class Rng;

// Matrix products. `matmul` is the OpenMP kernel, `matmul_reference` the
// serial triple loop it is checked against.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_reference(const Matrix& a, const Matrix& b);

/// aᵀa without materializing the transpose (Gram matrix).
Matrix gram(const Matrix& a);
Matrix gram_reference(const Matrix& a);

/// aᵀb.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// Small dense kernels used inside the recurrences. These stay serial: the
// hidden sizes are far too small to amortize a parallel region, parallelism
// lives one level up (examples in a batch, queries in an evaluation).
Vector matvec(const Matrix& m, std::span<const double> x);
void matvec_add(const Matrix& m, std::span<const double> x, std::span<double> y);
/// y += mᵀ g
void matvec_t_add(const Matrix& m, std::span<const double> g, std::span<double> y);
/// m += scale · a bᵀ
void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b, double scale = 1.0);
/// y += scale · x
void axpy(double scale, std::span<const double> x, std::span<double> y);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// u·v / (‖u‖‖v‖) clamped to [-1, 1]. Throws UndefinedSimilarityError when
/// either input has zero norm.
double cosine(std::span<const double> u, std::span<const double> v);
inline double cosine(const Vector& u, const Vector& v) { return cosine(u.span(), v.span()); }

/// Entries i.i.d. uniform in [-scale, +scale].
Matrix init_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng);

bool all_finite(std::span<const double> values);
inline bool all_finite(const Matrix& m) { return all_finite(m.span()); }
inline bool all_finite(const Vector& v) { return all_finite(v.span()); }

/// Solves the symmetric positive definite system a·x = b (b may have several
/// right-hand-side columns) by Cholesky factorization. Throws
/// RankDeficiencyError when a pivot is not safely positive.
Matrix solve_spd(const Matrix& a, const Matrix& b);

}  // namespace imaginet
