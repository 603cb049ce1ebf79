#include "imaginet/baseline.hpp"

#include <algorithm>
#include <limits>

#include "imaginet/errors.hpp"

namespace imaginet {

BowVector bow(std::span<const Token> sentence, std::size_t vocab_size, Token end_token) {
  BowVector out{Vector(vocab_size)};
  for (Token t : sentence) {
    if (t >= vocab_size) {
      throw VocabularyError("bow: token " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(vocab_size));
    }
    if (t != end_token) out.counts[t] += 1.0;
  }
  return out;
}

LinRegParams fit_ridge(const Matrix& X, const Matrix& Y, double lambda) {
  if (X.rows() != Y.rows()) {
    throw ShapeError("fit_ridge: design " + X.shape_string() + " vs targets " + Y.shape_string());
  }
  if (!(lambda >= 0.0)) throw ConfigError("fit_ridge: lambda must be nonnegative");
  const std::size_t n = X.rows(), d = X.cols(), K = Y.cols();

  Matrix design(n, d + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) design(i, j) = X(i, j);
    design(i, d) = 1.0;
  }
  Matrix normal = gram(design);
  for (std::size_t j = 0; j < d; ++j) normal(j, j) += lambda;  // intercept row excluded
  const Matrix rhs = matmul_tn(design, Y);

  Matrix solution;
  try {
    solution = solve_spd(normal, rhs);
  } catch (const RankDeficiencyError&) {
    throw RankDeficiencyError(
        "fit_ridge: normal equations are rank deficient; use lambda > 0 (got " +
        std::to_string(lambda) + ")");
  }

  LinRegParams p{Matrix(K, d), Vector(K)};
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < d; ++j) p.A(k, j) = solution(j, k);
    p.b[k] = solution(d, k);
  }
  return p;
}

double ridge_objective(const LinRegParams& p, const Matrix& X, const Matrix& Y, double lambda) {
  double sse = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    Vector pred = p.b;
    matvec_add(p.A, X.row(i), pred.span());
    for (std::size_t k = 0; k < Y.cols(); ++k) {
      const double r = pred[k] - Y(i, k);
      sse += r * r;
    }
  }
  double penalty = 0.0;
  for (double a : p.A.span()) penalty += a * a;
  return sse + lambda * penalty;
}

Vector predict(const LinRegParams& p, const BowVector& x) {
  if (x.counts.dim() != p.A.cols()) {
    throw ShapeError("predict: A " + p.A.shape_string() + " with bag of dim " +
                     std::to_string(x.counts.dim()));
  }
  Vector out = p.b;
  matvec_add(p.A, x.counts.span(), out.span());
  return out;
}

RidgeSelection select_ridge(const Matrix& X_train, const Matrix& Y_train, const Matrix& X_val,
                            const Matrix& Y_val, std::span<const double> lambdas) {
  if (lambdas.empty()) throw ConfigError("select_ridge: empty lambda grid");
  RidgeSelection best{0.0, std::numeric_limits<double>::infinity(), {}};
  for (double lambda : lambdas) {
    LinRegParams p = fit_ridge(X_train, Y_train, lambda);
    const double mse = ridge_objective(p, X_val, Y_val, 0.0) /
                       static_cast<double>(std::max<std::size_t>(X_val.rows() * Y_val.cols(), 1));
    if (mse < best.validation_mse) best = {lambda, mse, std::move(p)};
  }
  return best;
}

}  // namespace imaginet
