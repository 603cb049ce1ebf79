#include "imaginet/layers.hpp"

#include <algorithm>
#include <cmath>

#include "imaginet/errors.hpp"

namespace imaginet {

void ActivationConfig::validate() const {
  if (!(clip_lo < clip_hi)) throw ConfigError("activation: clip_lo must be below clip_hi");
  if (!(gate_slope > 0.0)) throw ConfigError("activation: gate_slope must be positive");
}

double steep_sigmoid(double z, double slope) {
  // Branch on sign so exp never overflows.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-slope * z));
  const double e = std::exp(slope * z);
  return e / (1.0 + e);
}

double clipped_relu(double z, double lo, double hi) {
  return std::clamp(0.5 * (z + std::abs(z)), lo, hi);
}

GruParams GruParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  return {Matrix(hidden_dim, input_dim), Matrix(hidden_dim, hidden_dim),
          Matrix(hidden_dim, input_dim), Matrix(hidden_dim, hidden_dim),
          Matrix(hidden_dim, input_dim), Matrix(hidden_dim, hidden_dim)};
}

void GruParams::check_shapes() const {
  const std::size_t h = W.rows(), in = W.cols();
  const auto ok_in = [&](const Matrix& m) { return m.rows() == h && m.cols() == in; };
  const auto ok_rec = [&](const Matrix& m) { return m.rows() == h && m.cols() == h; };
  if (!ok_in(Wz) || !ok_in(Wr) || !ok_rec(Uz) || !ok_rec(Ur) || !ok_rec(U)) {
    throw ShapeError("GruParams: inconsistent shapes, W is " + W.shape_string());
  }
}

GruStepTrace gru_step(const GruParams& p, const Vector& h_prev, const Vector& x,
                      const ActivationConfig& cfg) {
  const std::size_t hidden = p.hidden_dim();
  if (x.dim() != p.input_dim() || h_prev.dim() != hidden) {
    throw ShapeError("gru_step: input dim " + std::to_string(x.dim()) + ", state dim " +
                     std::to_string(h_prev.dim()) + " for W " + p.W.shape_string());
  }
  GruStepTrace t{Vector(hidden), Vector(hidden), Vector(hidden), Vector(hidden), x, h_prev};

  matvec_add(p.Wz, x.span(), t.z.span());
  matvec_add(p.Uz, h_prev.span(), t.z.span());
  matvec_add(p.Wr, x.span(), t.r.span());
  matvec_add(p.Ur, h_prev.span(), t.r.span());
  for (std::size_t i = 0; i < hidden; ++i) {
    t.z[i] = steep_sigmoid(t.z[i], cfg.gate_slope);
    t.r[i] = steep_sigmoid(t.r[i], cfg.gate_slope);
  }

  Vector gated(hidden);
  for (std::size_t i = 0; i < hidden; ++i) gated[i] = t.r[i] * h_prev[i];
  matvec_add(p.W, x.span(), t.h_cand.span());
  matvec_add(p.U, gated.span(), t.h_cand.span());
  for (std::size_t i = 0; i < hidden; ++i) {
    t.h_cand[i] = clipped_relu(t.h_cand[i], cfg.clip_lo, cfg.clip_hi);
    t.h[i] = (1.0 - t.z[i]) * h_prev[i] + t.z[i] * t.h_cand[i];
  }
  return t;
}

std::vector<GruStepTrace> gru_sequence(const GruParams& p, std::span<const Vector> inputs,
                                       const ActivationConfig& cfg) {
  std::vector<GruStepTrace> traces;
  traces.reserve(inputs.size());
  Vector h(p.hidden_dim());
  for (const Vector& x : inputs) {
    traces.push_back(gru_step(p, h, x, cfg));
    h = traces.back().h;
  }
  return traces;
}

std::vector<Vector> gru_backward_accumulate(std::span<const GruStepTrace> traces,
                                            const GruParams& p,
                                            std::span<const Vector> grad_h,
                                            const ActivationConfig& cfg,
                                            GruParams& g) {
  if (traces.size() != grad_h.size()) {
    throw InputError("gru_backward: " + std::to_string(traces.size()) + " traces but " +
                     std::to_string(grad_h.size()) + " output gradients");
  }
  const std::size_t hidden = p.hidden_dim();
  std::vector<Vector> dx(traces.size(), Vector(p.input_dim()));

  Vector carry(hidden);  // gradient flowing into h_t from step t+1
  Vector dz(hidden), dr(hidden), dcand(hidden), gated(hidden), dgated(hidden);
  for (std::size_t step = traces.size(); step-- > 0;) {
    const GruStepTrace& t = traces[step];
    if (grad_h[step].dim() != hidden) throw ShapeError("gru_backward: output gradient dim");

    Vector dh = carry;
    axpy(1.0, grad_h[step].span(), dh.span());

    Vector dprev(hidden);
    for (std::size_t i = 0; i < hidden; ++i) {
      dz[i] = dh[i] * (t.h_cand[i] - t.h_prev[i]) * cfg.gate_slope * t.z[i] * (1.0 - t.z[i]);
      dcand[i] = dh[i] * t.z[i] *
                 clipped_relu_grad_from_output(t.h_cand[i], cfg.clip_lo, cfg.clip_hi);
      dprev[i] = dh[i] * (1.0 - t.z[i]);
      gated[i] = t.r[i] * t.h_prev[i];
    }

    // Candidate: h̃ = σ(W x + U(r⊙h_prev))
    outer_add(g.W, dcand.span(), t.x.span());
    outer_add(g.U, dcand.span(), gated.span());
    matvec_t_add(p.W, dcand.span(), dx[step].span());
    dgated.fill(0.0);
    matvec_t_add(p.U, dcand.span(), dgated.span());
    for (std::size_t i = 0; i < hidden; ++i) {
      dr[i] = dgated[i] * t.h_prev[i] * cfg.gate_slope * t.r[i] * (1.0 - t.r[i]);
      dprev[i] += dgated[i] * t.r[i];
    }

    // Reset gate
    outer_add(g.Wr, dr.span(), t.x.span());
    outer_add(g.Ur, dr.span(), t.h_prev.span());
    matvec_t_add(p.Wr, dr.span(), dx[step].span());
    matvec_t_add(p.Ur, dr.span(), dprev.span());

    // Update gate
    outer_add(g.Wz, dz.span(), t.x.span());
    outer_add(g.Uz, dz.span(), t.h_prev.span());
    matvec_t_add(p.Wz, dz.span(), dx[step].span());
    matvec_t_add(p.Uz, dz.span(), dprev.span());

    carry = std::move(dprev);
  }
  return dx;
}

GruGradients gru_backward(std::span<const GruStepTrace> traces, const GruParams& p,
                          std::span<const Vector> grad_h, const ActivationConfig& cfg) {
  GruGradients out{GruParams::zeros(p.input_dim(), p.hidden_dim()), {}};
  out.inputs = gru_backward_accumulate(traces, p, grad_h, cfg, out.params);
  return out;
}

Vector embed(const Matrix& We, Token token) {
  if (token >= We.cols()) {
    throw VocabularyError("embed: token " + std::to_string(token) + " outside vocabulary of " +
                          std::to_string(We.cols()));
  }
  return We.column(token);
}

Vector visual_head(const Matrix& V, const Vector& h, const ActivationConfig& cfg) {
  if (V.cols() != h.dim()) {
    throw ShapeError("visual_head: V " + V.shape_string() + " with state dim " +
                     std::to_string(h.dim()));
  }
  Vector out = matvec(V, h.span());
  for (double& y : out) y = clipped_relu(y, cfg.clip_lo, cfg.clip_hi);
  return out;
}

Vector softmax(std::span<const double> logits) {
  Vector p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

Vector textual_head(const Matrix& L, const Vector& h) {
  if (L.cols() != h.dim()) {
    throw ShapeError("textual_head: L " + L.shape_string() + " with state dim " +
                     std::to_string(h.dim()));
  }
  return softmax(matvec(L, h.span()).span());
}

}  // namespace imaginet
