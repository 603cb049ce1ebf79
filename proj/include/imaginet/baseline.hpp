#pragma once

// Bag-of-words ridge regression from word counts to image features,
// î = A x + b. Order-blind by construction.

#include <cstddef>
#include <span>
#include <vector>

#include "imaginet/layers.hpp"
#include "imaginet/numcore.hpp"

namespace imaginet {

struct LinRegParams {
  Matrix A;  // K × vocab_size
  Vector b;  // K

  std::size_t vocab_size() const { return A.cols(); }
  std::size_t image_dim() const { return A.rows(); }
  bool operator==(const LinRegParams&) const = default;
};

/// Word counts; entries are nonnegative integers stored as reals.
struct BowVector {
  Vector counts;
};

/// Counts every token except `end_token`.
BowVector bow(std::span<const Token> sentence, std::size_t vocab_size, Token end_token);

/// Minimizes Σ‖A x + b - y‖² + λ‖A‖²_F with the intercept unpenalized, via the
/// normal equations of the design augmented with a constant column.
/// Rows of `X` are examples (bag-of-words), rows of `Y` their targets.
LinRegParams fit_ridge(const Matrix& X, const Matrix& Y, double lambda);

/// Value of the ridge objective at `p`.
double ridge_objective(const LinRegParams& p, const Matrix& X, const Matrix& Y, double lambda);

Vector predict(const LinRegParams& p, const BowVector& x);

struct RidgeSelection {
  double lambda;
  double validation_mse;
  LinRegParams params;
};

/// Fits each candidate on the training rows and keeps the one with the
/// lowest mean squared error on the validation rows. Ties keep the earlier
/// candidate.
RidgeSelection select_ridge(const Matrix& X_train, const Matrix& Y_train, const Matrix& X_val,
                            const Matrix& Y_val, std::span<const double> lambdas);

inline constexpr double kDefaultRidgeLambda = 1.0;
inline constexpr double kRidgeLambdaGrid[] = {0.01, 0.1, 1.0, 10.0};

}  // namespace imaginet
