#include "imaginet/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "imaginet/errors.hpp"
#include "imaginet/rng.hpp"

namespace imaginet {

namespace {

// Below this many multiply-adds the parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

void require_product_shapes(const Matrix& a, const Matrix& b, std::size_t a_inner,
                            std::size_t b_inner, const char* op) {
  if (a_inner != b_inner) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

}  // namespace

void Vector::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector Matrix::column(std::size_t c) const {
  if (c >= cols_) throw ShapeError("column index out of range");
  Vector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << "(" << rows_ << "x" << cols_ << ")";
  return os.str();
}

Matrix matmul_reference(const Matrix& a, const Matrix& b) {
  require_product_shapes(a, b, a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require_product_shapes(a, b, a.cols(), b.rows(), "matmul");
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  Matrix out(n, m);
  const bool parallel = n * inner * m >= kParallelWork;
  // i-k-j order streams through rows of b and out; each output row is owned
  // by one thread so the result does not depend on the thread count.
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    double* out_row = out.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(i, k);
      const double* b_row = b.row(k).data();
#pragma omp simd
      for (std::size_t j = 0; j < m; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix gram_reference(const Matrix& a) { return matmul_reference(a.transpose(), a); }

Matrix gram(const Matrix& a) { return matmul_tn(a, a); }

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require_product_shapes(a, b, a.rows(), b.rows(), "matmul_tn");
  const std::size_t n = a.cols(), inner = a.rows(), m = b.cols();
  Matrix out(n, m);
  const bool parallel = n * inner * m >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    double* out_row = out.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      const double* b_row = b.row(k).data();
#pragma omp simd
      for (std::size_t j = 0; j < m; ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
  Vector y(m.rows());
  matvec_add(m, x, y.span());
  return y;
}

void matvec_add(const Matrix& m, std::span<const double> x, std::span<double> y) {
  if (m.cols() != x.size() || m.rows() != y.size()) {
    throw ShapeError("matvec: matrix " + m.shape_string() + " with vector of dim " +
                     std::to_string(x.size()));
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

void matvec_t_add(const Matrix& m, std::span<const double> g, std::span<double> y) {
  if (m.rows() != g.size() || m.cols() != y.size()) {
    throw ShapeError("matvec_t: matrix " + m.shape_string() + " with vector of dim " +
                     std::to_string(g.size()));
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* row = m.row(r).data();
    for (std::size_t c = 0; c < y.size(); ++c) y[c] += gr * row[c];
  }
}

void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b, double scale) {
  if (m.rows() != a.size() || m.cols() != b.size()) {
    throw ShapeError("outer_add: target " + m.shape_string());
  }
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double ar = scale * a[r];
    if (ar == 0.0) continue;
    double* row = m.row(r).data();
    for (std::size_t c = 0; c < b.size(); ++c) row[c] += ar * b[c];
  }
}

void axpy(double scale, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += scale * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine: dimensions " + std::to_string(u.size()) + " and " +
                     std::to_string(v.size()));
  }
  const double nu = norm2(u), nv = norm2(v);
  if (nu == 0.0 || nv == 0.0) throw UndefinedSimilarityError("cosine: zero-norm input");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

Matrix init_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  if (!(scale > 0.0)) throw ConfigError("init_matrix: scale must be positive");
  Matrix m(rows, cols);
  for (double& x : m.span()) x = rng.uniform(-scale, scale);
  return m;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n) {
    throw ShapeError("solve_spd: system " + a.shape_string() + " with rhs " + b.shape_string());
  }
  // A pivot counts as zero once it falls below this fraction of its own
  // diagonal entry, so badly scaled but regular systems still solve.
  const double rel_tol = 1e-12 * static_cast<double>(std::max<std::size_t>(n, 1));

  // Lower-triangular factor, a = l lᵀ.
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0 && d > rel_tol * a(j, j))) {
      throw RankDeficiencyError("solve_spd: matrix is singular or not positive definite (pivot " +
                                std::to_string(j) + ")");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }

  Matrix x = b;
  const std::size_t m = b.cols();
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = x(i, c);
      for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
      x(i, c) = s / l(i, i);
    }
  }
  return x;
}

}  // namespace imaginet
