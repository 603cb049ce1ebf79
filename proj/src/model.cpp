#include "imaginet/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "imaginet/errors.hpp"
#include "imaginet/rng.hpp"

namespace imaginet {

std::string ModelDims::describe() const {
  std::ostringstream os;
  os << "vocab=" << vocab_size << " embed=" << embedding_dim << " hidden=" << hidden_dim
     << " K=" << image_dim;
  return os.str();
}

ImaginetParams ImaginetParams::zeros(const ModelDims& d) {
  return {Matrix(d.embedding_dim, d.vocab_size), GruParams::zeros(d.embedding_dim, d.hidden_dim),
          GruParams::zeros(d.embedding_dim, d.hidden_dim), Matrix(d.image_dim, d.hidden_dim),
          Matrix(d.vocab_size, d.hidden_dim)};
}

ImaginetParams ImaginetParams::random(const ModelDims& dims, Rng& rng,
                                      std::optional<double> scale) {
  ImaginetParams p = zeros(dims);
  for (NamedTensor t : tensors(p)) {
    const double bound =
        scale.value_or(std::sqrt(6.0 / static_cast<double>(t.tensor->rows() + t.tensor->cols())));
    *t.tensor = init_matrix(t.tensor->rows(), t.tensor->cols(), bound, rng);
  }
  return p;
}

ModelDims ImaginetParams::dims() const {
  return {We.cols(), We.rows(), gru_visual.hidden_dim(), V.rows()};
}

void ImaginetParams::check_shapes() const {
  const ModelDims d = dims();
  gru_visual.check_shapes();
  gru_textual.check_shapes();
  const bool ok = gru_visual.input_dim() == d.embedding_dim &&
                  gru_textual.input_dim() == d.embedding_dim &&
                  gru_textual.hidden_dim() == d.hidden_dim && V.cols() == d.hidden_dim &&
                  L.rows() == d.vocab_size && L.cols() == d.hidden_dim;
  if (!ok) throw ShapeError("ImaginetParams: inconsistent shapes for " + d.describe());
}

bool ImaginetParams::operator==(const ImaginetParams& o) const {
  const auto a = tensors(*this), b = tensors(o);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(*a[i].tensor == *b[i].tensor)) return false;
  return true;
}

namespace {

template <typename P, typename Out>
std::vector<Out> enumerate(P& p) {
  return {{"We", &p.We},
          {"gru_visual.Wz", &p.gru_visual.Wz},
          {"gru_visual.Uz", &p.gru_visual.Uz},
          {"gru_visual.Wr", &p.gru_visual.Wr},
          {"gru_visual.Ur", &p.gru_visual.Ur},
          {"gru_visual.W", &p.gru_visual.W},
          {"gru_visual.U", &p.gru_visual.U},
          {"gru_textual.Wz", &p.gru_textual.Wz},
          {"gru_textual.Uz", &p.gru_textual.Uz},
          {"gru_textual.Wr", &p.gru_textual.Wr},
          {"gru_textual.Ur", &p.gru_textual.Ur},
          {"gru_textual.W", &p.gru_textual.W},
          {"gru_textual.U", &p.gru_textual.U},
          {"V", &p.V},
          {"L", &p.L}};
}

void check_sentence(const ImaginetParams& p, std::span<const Token> sentence) {
  if (sentence.empty()) throw InputError("forward: empty sentence");
  for (Token t : sentence) {
    if (t >= p.We.cols()) {
      throw VocabularyError("forward: token " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(p.We.cols()));
    }
  }
}

}  // namespace

std::vector<NamedTensor> tensors(ImaginetParams& p) {
  return enumerate<ImaginetParams, NamedTensor>(p);
}

std::vector<NamedConstTensor> tensors(const ImaginetParams& p) {
  return enumerate<const ImaginetParams, NamedConstTensor>(p);
}

double variant_alpha(ModelVariant v) {
  switch (v) {
    case ModelVariant::Visual: return 0.0;
    case ModelVariant::Textual: return 1.0;
    case ModelVariant::Multitask: return 0.1;
  }
  return 0.1;
}

std::string_view variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::Visual: return "visual";
    case ModelVariant::Textual: return "textual";
    case ModelVariant::Multitask: return "multitask";
  }
  return "multitask";
}

LossConfig LossConfig::for_variant(ModelVariant v, std::size_t image_dim) {
  return {variant_alpha(v), image_dim};
}

void LossConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("loss: alpha must lie in [0, 1]");
  if (image_dim < 1) throw ConfigError("loss: K must be at least 1");
}

ForwardTrace forward(const ImaginetParams& p, std::span<const Token> sentence,
                     const ForwardOptions& opts) {
  check_sentence(p, sentence);
  std::vector<Vector> inputs;
  inputs.reserve(sentence.size());
  for (Token t : sentence) inputs.push_back(embed(p.We, t));

  ForwardTrace trace;
  trace.sentence_len = sentence.size();
  trace.visual_traces = gru_sequence(p.gru_visual, inputs, opts.activation);
  trace.textual_traces = gru_sequence(p.gru_textual, inputs, opts.activation);
  trace.predicted_image = visual_head(p.V, trace.visual_traces.back().h, opts.activation);
  if (!opts.skip_textual) {
    trace.next_word_dists.reserve(sentence.size());
    for (const GruStepTrace& s : trace.textual_traces)
      trace.next_word_dists.push_back(textual_head(p.L, s.h));
  }
  return trace;
}

LossValue loss(const ForwardTrace& trace, std::span<const Token> sentence,
               const Vector& target_image, const LossConfig& cfg) {
  if (target_image.dim() != cfg.image_dim || trace.predicted_image.dim() != cfg.image_dim) {
    throw ShapeError("loss: image dims " + std::to_string(target_image.dim()) + "/" +
                     std::to_string(trace.predicted_image.dim()) + " but K=" +
                     std::to_string(cfg.image_dim));
  }
  if (sentence.size() != trace.sentence_len) throw InputError("loss: trace/sentence mismatch");

  LossValue out;
  const std::size_t tau = trace.sentence_len;
  if (cfg.alpha > 0.0 && tau > 1) {
    if (trace.next_word_dists.size() != tau) throw InputError("loss: trace lacks textual dists");
    double acc = 0.0;
    for (std::size_t t = 0; t + 1 < tau; ++t) {
      double prob = trace.next_word_dists[t][sentence[t + 1]];
      if (prob < cfg.prob_floor) {
        prob = cfg.prob_floor;
        ++out.clamp_events;
      }
      acc -= std::log(prob);
    }
    out.textual = acc / static_cast<double>(tau);
  }
  double sq = 0.0;
  for (std::size_t k = 0; k < cfg.image_dim; ++k) {
    const double d = trace.predicted_image[k] - target_image[k];
    sq += d * d;
  }
  out.visual = sq / static_cast<double>(cfg.image_dim);
  out.total = cfg.alpha * out.textual + (1.0 - cfg.alpha) * out.visual;
  return out;
}

void backward_accumulate(const ImaginetParams& p, const ForwardTrace& trace,
                         std::span<const Token> sentence, const Vector& target_image,
                         const LossConfig& cfg, ImaginetParams& grads, double scale,
                         const ActivationConfig& act) {
  const std::size_t tau = trace.sentence_len;
  if (sentence.size() != tau || trace.visual_traces.size() != tau ||
      trace.textual_traces.size() != tau) {
    throw InputError("backward: trace does not match the sentence");
  }
  if (target_image.dim() != cfg.image_dim || p.V.rows() != cfg.image_dim) {
    throw ShapeError("backward: target dim " + std::to_string(target_image.dim()) +
                     " but K=" + std::to_string(cfg.image_dim));
  }
  const std::size_t hidden = p.gru_visual.hidden_dim();

  const double visual_weight = scale * (1.0 - cfg.alpha);
  if (visual_weight != 0.0) {
    // d lv / d î = (2/K)(î - i), gated by the clipped rectifier.
    const std::size_t K = cfg.image_dim;
    Vector dpre(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double y = trace.predicted_image[k];
      dpre[k] = visual_weight * 2.0 / static_cast<double>(K) * (y - target_image[k]) *
                clipped_relu_grad_from_output(y, act.clip_lo, act.clip_hi);
    }
    const Vector& h_last = trace.visual_traces.back().h;
    outer_add(grads.V, dpre.span(), h_last.span());
    std::vector<Vector> grad_h(tau, Vector(hidden));
    matvec_t_add(p.V, dpre.span(), grad_h.back().span());
    const auto dx = gru_backward_accumulate(trace.visual_traces, p.gru_visual, grad_h, act,
                                            grads.gru_visual);
    for (std::size_t t = 0; t < tau; ++t) {
      const Token w = sentence[t];
      for (std::size_t e = 0; e < dx[t].dim(); ++e) grads.We(e, w) += dx[t][e];
    }
  }

  const double textual_weight = scale * cfg.alpha;
  if (textual_weight != 0.0 && tau > 1) {
    if (trace.next_word_dists.size() != tau) throw InputError("backward: missing textual dists");
    const double w = textual_weight / static_cast<double>(tau);
    std::vector<Vector> grad_h(tau, Vector(hidden));
    for (std::size_t t = 0; t + 1 < tau; ++t) {
      const Vector& dist = trace.next_word_dists[t];
      const Token target = sentence[t + 1];
      // A floored probability makes the term constant, so it contributes
      // nothing to the gradient.
      if (dist[target] < cfg.prob_floor) continue;
      Vector dlogits(dist.dim());
      for (std::size_t v = 0; v < dist.dim(); ++v) dlogits[v] = w * dist[v];
      dlogits[target] -= w;
      outer_add(grads.L, dlogits.span(), trace.textual_traces[t].h.span());
      matvec_t_add(p.L, dlogits.span(), grad_h[t].span());
    }
    const auto dx = gru_backward_accumulate(trace.textual_traces, p.gru_textual, grad_h, act,
                                            grads.gru_textual);
    for (std::size_t t = 0; t < tau; ++t) {
      const Token tok = sentence[t];
      for (std::size_t e = 0; e < dx[t].dim(); ++e) grads.We(e, tok) += dx[t][e];
    }
  }
}

ImaginetParams backward(const ImaginetParams& p, const ForwardTrace& trace,
                        std::span<const Token> sentence, const Vector& target_image,
                        const LossConfig& cfg, const ActivationConfig& act) {
  ImaginetParams grads = ImaginetParams::zeros(p.dims());
  backward_accumulate(p, trace, sentence, target_image, cfg, grads, 1.0, act);
  return grads;
}

Vector encode_visual(const ImaginetParams& p, std::span<const Token> sentence,
                     const ActivationConfig& act) {
  check_sentence(p, sentence);
  Vector h(p.gru_visual.hidden_dim());
  for (Token t : sentence) h = gru_step(p.gru_visual, h, embed(p.We, t), act).h;
  return h;
}

Vector project_word(const ImaginetParams& p, Token word, bool append_end, Token end_token,
                    const ActivationConfig& act) {
  std::vector<Token> sentence{word};
  if (append_end) sentence.push_back(end_token);
  check_sentence(p, sentence);
  return visual_head(p.V, encode_visual(p, sentence, act), act);
}

double min_kink_distance(const ImaginetParams& p, const ForwardTrace& trace,
                         const ActivationConfig& act) {
  double best = std::numeric_limits<double>::infinity();
  const auto consider = [&](double pre) {
    best = std::min({best, std::abs(pre - act.clip_lo), std::abs(pre - act.clip_hi)});
  };
  const auto scan_gru = [&](const GruParams& g, const std::vector<GruStepTrace>& steps) {
    for (const GruStepTrace& s : steps) {
      Vector gated(s.h_prev.dim());
      for (std::size_t i = 0; i < gated.dim(); ++i) gated[i] = s.r[i] * s.h_prev[i];
      Vector pre = matvec(g.W, s.x.span());
      matvec_add(g.U, gated.span(), pre.span());
      for (double v : pre) consider(v);
    }
  };
  scan_gru(p.gru_visual, trace.visual_traces);
  scan_gru(p.gru_textual, trace.textual_traces);
  if (!trace.visual_traces.empty()) {
    for (double v : matvec(p.V, trace.visual_traces.back().h.span())) consider(v);
  }
  return best;
}

}  // namespace imaginet
