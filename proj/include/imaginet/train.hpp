#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "imaginet/baseline.hpp"
#include "imaginet/data.hpp"
#include "imaginet/model.hpp"
#include "imaginet/optim.hpp"

namespace imaginet {

struct BatchResult {
  ImaginetParams grads;  // mean over the batch
  LossValue loss;        // mean over the batch; clamp_events summed
};

/// Mean loss and gradient over a minibatch, one example after another.
/// Reference implementation for `batch_gradient`.
BatchResult batch_gradient_reference(const ImaginetParams& p,
                                     std::span<const CaptionRecord* const> batch,
                                     const LossConfig& cfg);

/// Same quantity computed with OpenMP. Examples are split into fixed blocks
/// of `kReductionBlock`; each block is accumulated serially and the block
/// partial sums are added in block order, so the result is identical for any
/// thread count (and equal to the reference up to rounding).
BatchResult batch_gradient(const ImaginetParams& p, std::span<const CaptionRecord* const> batch,
                           const LossConfig& cfg);

inline constexpr std::size_t kReductionBlock = 8;

struct TrainConfig {
  LossConfig loss;
  AdamConfig adam;
  std::size_t epochs = 8;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  /// Global gradient-norm cap; 0 disables clipping.
  double max_grad_norm = 0.0;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double textual = 0.0;
  double visual = 0.0;
  double total = 0.0;
  std::size_t clamp_events = 0;
};

/// Called after every epoch with the updated parameters.
using EpochCallback = std::function<void(const EpochStats&, const ImaginetParams&)>;

/// Minibatch Adam over shuffled examples. Epoch statistics are the mean
/// training loss over the epoch's examples, measured before each update.
/// Throws NumericalError when the loss becomes non-finite.
std::vector<EpochStats> train_model(ImaginetParams& params,
                                    std::span<const CaptionRecord> records,
                                    const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Bag-of-words design matrix and target matrix for ridge regression.
std::pair<Matrix, Matrix> linreg_design(std::span<const CaptionRecord> records,
                                        std::size_t vocab_size, Token end_token);

}  // namespace imaginet
