#include "imaginet/train.hpp"

#include <cmath>
#include <numeric>

#include "imaginet/errors.hpp"
#include "imaginet/rng.hpp"

namespace imaginet {

namespace {

void add_into(ImaginetParams& acc, const ImaginetParams& part) {
  auto a = tensors(acc);
  const auto b = tensors(part);
  for (std::size_t i = 0; i < a.size(); ++i) axpy(1.0, b[i].tensor->span(), a[i].tensor->span());
}

void accumulate_example(const ImaginetParams& p, const CaptionRecord& rec, const LossConfig& cfg,
                        double scale, ImaginetParams& grads, LossValue& loss_acc) {
  ForwardOptions opts;
  opts.skip_textual = cfg.alpha == 0.0;
  const ForwardTrace trace = forward(p, rec.tokens, opts);
  const LossValue l = loss(trace, rec.tokens, rec.target, cfg);
  loss_acc.total += scale * l.total;
  loss_acc.textual += scale * l.textual;
  loss_acc.visual += scale * l.visual;
  loss_acc.clamp_events += l.clamp_events;
  backward_accumulate(p, trace, rec.tokens, rec.target, cfg, grads, scale);
}

}  // namespace

BatchResult batch_gradient_reference(const ImaginetParams& p,
                                     std::span<const CaptionRecord* const> batch,
                                     const LossConfig& cfg) {
  if (batch.empty()) throw InputError("batch_gradient: empty batch");
  BatchResult out{ImaginetParams::zeros(p.dims()), {}};
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const CaptionRecord* rec : batch) accumulate_example(p, *rec, cfg, scale, out.grads, out.loss);
  return out;
}

BatchResult batch_gradient(const ImaginetParams& p, std::span<const CaptionRecord* const> batch,
                           const LossConfig& cfg) {
  if (batch.empty()) throw InputError("batch_gradient: empty batch");
  const std::size_t n_blocks = (batch.size() + kReductionBlock - 1) / kReductionBlock;
  if (n_blocks == 1) return batch_gradient_reference(p, batch, cfg);

  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<ImaginetParams> partial(n_blocks);
  std::vector<LossValue> partial_loss(n_blocks);
  std::vector<std::string> failures(n_blocks);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
    try {
      partial[b] = ImaginetParams::zeros(p.dims());
      const std::size_t begin = b * kReductionBlock;
      const std::size_t end = std::min(batch.size(), begin + kReductionBlock);
      for (std::size_t i = begin; i < end; ++i)
        accumulate_example(p, *batch[i], cfg, scale, partial[b], partial_loss[b]);
    } catch (const std::exception& e) {
      failures[b] = e.what();
    }
  }
  for (const std::string& f : failures)
    if (!f.empty()) throw InputError("batch_gradient: " + f);

  BatchResult out{std::move(partial[0]), partial_loss[0]};
  for (std::size_t b = 1; b < n_blocks; ++b) {
    add_into(out.grads, partial[b]);
    out.loss.total += partial_loss[b].total;
    out.loss.textual += partial_loss[b].textual;
    out.loss.visual += partial_loss[b].visual;
    out.loss.clamp_events += partial_loss[b].clamp_events;
  }
  return out;
}

std::vector<EpochStats> train_model(ImaginetParams& params,
                                    std::span<const CaptionRecord> records,
                                    const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.loss.validate();
  if (records.empty()) throw InputError("train: no training examples");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("train: epochs and batch size must be positive");

  AdamState adam = AdamState::init(params.dims(), cfg.adam);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochStats> history;
  std::vector<const CaptionRecord*> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    EpochStats stats{epoch};
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&records[order[i]]);

      BatchResult res = batch_gradient(params, batch, cfg.loss);
      if (!std::isfinite(res.loss.total)) {
        throw NumericalError("train: non-finite loss in epoch " + std::to_string(epoch));
      }
      const double weight = static_cast<double>(batch.size());
      stats.textual += weight * res.loss.textual;
      stats.visual += weight * res.loss.visual;
      stats.total += weight * res.loss.total;
      stats.clamp_events += res.loss.clamp_events;

      if (cfg.max_grad_norm > 0.0) clip_grad_norm(res.grads, cfg.max_grad_norm);
      adam_step(adam, params, res.grads);
    }
    const double n = static_cast<double>(records.size());
    stats.textual /= n;
    stats.visual /= n;
    stats.total /= n;
    history.push_back(stats);
    if (on_epoch) on_epoch(stats, params);
  }
  return history;
}

std::pair<Matrix, Matrix> linreg_design(std::span<const CaptionRecord> records,
                                        std::size_t vocab_size, Token end_token) {
  if (records.empty()) throw InputError("linreg: no training examples");
  const std::size_t K = records.front().target.dim();
  Matrix X(records.size(), vocab_size), Y(records.size(), K);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const BowVector x = bow(records[i].tokens, vocab_size, end_token);
    std::copy(x.counts.begin(), x.counts.end(), X.row(i).begin());
    if (records[i].target.dim() != K) throw DataError("linreg: inconsistent target dimension");
    std::copy(records[i].target.begin(), records[i].target.end(), Y.row(i).begin());
  }
  return {std::move(X), std::move(Y)};
}

}  // namespace imaginet
