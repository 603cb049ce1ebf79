#include "imaginet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imaginet/errors.hpp"
#include "imaginet/rng.hpp"

namespace imaginet {

AdamState AdamState::init(const ModelDims& dims, const AdamConfig& config) {
  return {config, ImaginetParams::zeros(dims), ImaginetParams::zeros(dims), 0};
}

void adam_step(const AdamConfig& c, std::size_t step, std::span<Matrix* const> params,
               std::span<const Matrix* const> grads, std::span<Matrix* const> m,
               std::span<Matrix* const> v, std::span<const std::string_view> names) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw ShapeError("adam_step: tensor lists differ in length");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i]->same_shape(*params[i]) || !m[i]->same_shape(*params[i]) ||
        !v[i]->same_shape(*params[i])) {
      throw ShapeError("adam_step: shape mismatch for tensor " + std::to_string(i));
    }
    if (!all_finite(*grads[i])) {
      const std::string name = i < names.size() ? std::string(names[i]) : std::to_string(i);
      throw OptimizationError("adam_step: non-finite gradient in tensor " + name);
    }
  }
  if (step < 1) throw OptimizationError("adam_step: step count must start at 1");

  const double t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->span();
    auto g = grads[i]->span();
    auto mm = m[i]->span();
    auto vv = v[i]->span();
    for (std::size_t j = 0; j < p.size(); ++j) {
      mm[j] = c.beta1 * mm[j] + (1.0 - c.beta1) * g[j];
      vv[j] = c.beta2 * vv[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = mm[j] / correction1;
      const double v_hat = vv[j] / correction2;
      p[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void adam_step(AdamState& state, ImaginetParams& params, const ImaginetParams& grads) {
  const auto p = tensors(params);
  const auto g = tensors(grads);
  const auto m = tensors(state.m);
  const auto v = tensors(state.v);
  std::vector<Matrix*> pp, mm, vv;
  std::vector<const Matrix*> gg;
  std::vector<std::string_view> names;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pp.push_back(p[i].tensor);
    gg.push_back(g[i].tensor);
    mm.push_back(m[i].tensor);
    vv.push_back(v[i].tensor);
    names.push_back(p[i].name);
  }
  adam_step(state.config, state.step_count + 1, pp, gg, mm, vv, names);
  ++state.step_count;
}

double global_norm(const ImaginetParams& grads) {
  double sq = 0.0;
  for (const NamedConstTensor& t : tensors(grads))
    for (double x : t.tensor->span()) sq += x * x;
  return std::sqrt(sq);
}

double clip_grad_norm(ImaginetParams& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (NamedTensor t : tensors(grads))
      for (double& x : t.tensor->span()) x *= s;
  }
  return norm;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::span<const GradCheckTensor> tensors,
                           const GradCheckOptions& opts) {
  if (!(opts.epsilon >= 1e-7 && opts.epsilon <= 1e-3)) {
    throw ConfigError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  }
  Rng rng(opts.seed);
  GradCheckReport report;
  for (const GradCheckTensor& t : tensors) {
    if (!t.analytic->same_shape(*t.param)) {
      throw ShapeError("grad_check: analytic gradient shape differs for " + t.name);
    }
    const std::size_t n = t.param->size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (n > opts.coords_per_tensor) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(opts.coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    TensorGradError err{t.name, coords.size(), 0.0};
    auto values = t.param->span();
    for (std::size_t idx : coords) {
      const double saved = values[idx];
      values[idx] = saved + opts.epsilon;
      const double up = loss_fn();
      values[idx] = saved - opts.epsilon;
      const double down = loss_fn();
      values[idx] = saved;
      const double numeric = (up - down) / (2.0 * opts.epsilon);
      err.max_rel_error =
          std::max(err.max_rel_error, relative_error(t.analytic->span()[idx], numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, err.max_rel_error);
    report.tensors.push_back(std::move(err));
  }
  return report;
}

GradCheckReport grad_check(const std::function<double(const ImaginetParams&)>& loss_fn,
                           ImaginetParams& params, const ImaginetParams& analytic,
                           const GradCheckOptions& opts) {
  std::vector<GradCheckTensor> list;
  const auto p = tensors(params);
  const auto a = tensors(analytic);
  for (std::size_t i = 0; i < p.size(); ++i)
    list.push_back({std::string(p[i].name), p[i].tensor, a[i].tensor});
  return grad_check([&] { return loss_fn(params); }, list, opts);
}

GradCheckInstance sample_gradcheck_instance(const ModelDims& dims, std::size_t sentence_len,
                                            Rng& rng, double kink_margin,
                                            const ActivationConfig& act) {
  if (sentence_len < 1) throw ConfigError("gradcheck: sentence length must be at least 1");
  GradCheckInstance inst;
  inst.sentence.resize(sentence_len);
  inst.target = Vector(dims.image_dim);
  for (;;) {
    inst.params = ImaginetParams::random(dims, rng, 1.0);
    for (GruParams* g : {&inst.params.gru_visual, &inst.params.gru_textual}) {
      for (Matrix* m : {&g->Wz, &g->Uz, &g->Wr, &g->Ur})
        for (double& x : m->span()) x *= 0.25;
    }
    for (Token& t : inst.sentence) t = rng.below(dims.vocab_size);
    ForwardOptions fo;
    fo.activation = act;
    const ForwardTrace trace = forward(inst.params, inst.sentence, fo);
    for (std::size_t k = 0; k < dims.image_dim; ++k)
      inst.target[k] = trace.predicted_image[k] + rng.uniform(-0.1, 0.1);
    if (min_kink_distance(inst.params, trace, act) >= kink_margin) return inst;
    ++inst.resampled;
  }
}

}  // namespace imaginet
