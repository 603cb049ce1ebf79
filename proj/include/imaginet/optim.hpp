#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "imaginet/model.hpp"

namespace imaginet {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates, shaped like the parameters.
struct AdamState {
  AdamConfig config;
  ImaginetParams m;
  ImaginetParams v;
  std::size_t step_count = 0;

  static AdamState init(const ModelDims& dims, const AdamConfig& config = {});
};

/// One bias-corrected Adam update of `params` in place. Throws
/// OptimizationError naming the tensor if any gradient entry is not finite;
/// in that case nothing is modified.
void adam_step(AdamState& state, ImaginetParams& params, const ImaginetParams& grads);

/// Adam on a bare list of tensors. The moment lists must match `params`.
void adam_step(const AdamConfig& config, std::size_t step, std::span<Matrix* const> params,
               std::span<const Matrix* const> grads, std::span<Matrix* const> m,
               std::span<Matrix* const> v, std::span<const std::string_view> names = {});

double global_norm(const ImaginetParams& grads);

/// Rescales `grads` so its global L2 norm is at most `max_norm`. Returns the
/// norm before rescaling.
double clip_grad_norm(ImaginetParams& grads, double max_norm);

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Coordinates sampled per tensor; smaller tensors are checked in full.
  std::size_t coords_per_tensor = 30;
  std::uint64_t seed = 0;
};

struct TensorGradError {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<TensorGradError> tensors;
  double max_rel_error = 0.0;
};

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

struct GradCheckTensor {
  std::string name;
  Matrix* param;          // perturbed in place and restored
  const Matrix* analytic; // same shape as *param
};

/// Compares analytic gradients with central differences
/// (f(x+ε) - f(x-ε)) / 2ε on a seeded sample of coordinates per tensor.
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::span<const GradCheckTensor> tensors,
                           const GradCheckOptions& opts = {});

/// Convenience overload for the full model: pairs every parameter tensor with
/// the matching tensor of `analytic`.
GradCheckReport grad_check(const std::function<double(const ImaginetParams&)>& loss_fn,
                           ImaginetParams& params, const ImaginetParams& analytic,
                           const GradCheckOptions& opts = {});

struct GradCheckInstance {
  ImaginetParams params;
  std::vector<Token> sentence;
  Vector target;
  /// Draws rejected for a pre-activation within `kink_margin` of a kink.
  std::size_t resampled = 0;
};

/// Random small problem for gradient checking. Gate weights are drawn at a
/// quarter of the other tensors' scale so the steep gates stay out of
/// saturation, and the target lies within 0.1 of the predicted image so the
/// loss (and its rounding noise) stays small.
GradCheckInstance sample_gradcheck_instance(const ModelDims& dims, std::size_t sentence_len,
                                            Rng& rng, double kink_margin = 1e-3,
                                            const ActivationConfig& act = {});

}  // namespace imaginet
