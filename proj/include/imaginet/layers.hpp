#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imaginet/numcore.hpp"

namespace imaginet {

using Token = std::size_t;

struct ActivationConfig {
  double gate_slope = 3.75;
  double clip_lo = 0.0;
  double clip_hi = 5.0;

  /// Throws ConfigError unless clip_lo < clip_hi and gate_slope > 0.
  void validate() const;
};

/// 1 / (1 + exp(-slope·z)).
double steep_sigmoid(double z, double slope = 3.75);

/// clip(0.5(z + |z|), lo, hi): a rectifier capped at `hi`.
double clipped_relu(double z, double lo = 0.0, double hi = 5.0);

/// Derivative of clipped_relu expressed through its output: 1 strictly inside
/// (lo, hi), 0 at or beyond either kink.
inline double clipped_relu_grad_from_output(double y, double lo, double hi) {
  return (y > lo && y < hi) ? 1.0 : 0.0;
}

/// Weights of one gated recurrent unit. Input maps are hidden×input,
/// recurrent maps hidden×hidden. There are no biases.
struct GruParams {
  Matrix Wz, Uz, Wr, Ur, W, U;

  static GruParams zeros(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return W.cols(); }
  std::size_t hidden_dim() const { return W.rows(); }

  /// Throws ShapeError if the six matrices are not mutually consistent.
  void check_shapes() const;
};

/// Activations of one GRU step, kept for the backward pass.
struct GruStepTrace {
  Vector z;       // update gate
  Vector r;       // reset gate
  Vector h_cand;  // candidate activation
  Vector h;       // new hidden state
  Vector x;       // input
  Vector h_prev;  // previous hidden state
};

/// h = (1-z)⊙h_prev + z⊙h̃ with
///   z = σs(Wz x + Uz h_prev), r = σs(Wr x + Ur h_prev),
///   h̃ = σ(W x + U(r⊙h_prev)).
GruStepTrace gru_step(const GruParams& p, const Vector& h_prev, const Vector& x,
                      const ActivationConfig& cfg = {});

/// Runs the recurrence over a whole input sequence starting from h0 = 0.
std::vector<GruStepTrace> gru_sequence(const GruParams& p, std::span<const Vector> inputs,
                                       const ActivationConfig& cfg = {});

struct GruGradients {
  GruParams params;
  std::vector<Vector> inputs;  // dLoss/dx_t, one per step
};

/// Backpropagation through time over a recorded sequence.
///
/// `grad_h[t]` is the gradient of the downstream loss with respect to the
/// hidden output of step t coming from outside the recurrence (for the visual
/// pathway only the last entry is nonzero). Parameter gradients are
/// accumulated into `param_grads`, which must already have the right shapes;
/// the input gradients are returned one per step.
std::vector<Vector> gru_backward_accumulate(std::span<const GruStepTrace> traces,
                                            const GruParams& p,
                                            std::span<const Vector> grad_h,
                                            const ActivationConfig& cfg,
                                            GruParams& param_grads);

GruGradients gru_backward(std::span<const GruStepTrace> traces, const GruParams& p,
                          std::span<const Vector> grad_h, const ActivationConfig& cfg = {});

/// Column `token` of the embedding matrix.
Vector embed(const Matrix& We, Token token);

/// î = σ(V h) with the clipped rectifier.
Vector visual_head(const Matrix& V, const Vector& h, const ActivationConfig& cfg = {});

/// softmax(L h), computed with max-logit subtraction.
Vector textual_head(const Matrix& L, const Vector& h);

/// Numerically stable softmax of a logit vector.
Vector softmax(std::span<const double> logits);

}  // namespace imaginet
