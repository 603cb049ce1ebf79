#pragma once

// The two-pathway grounded language model.
//
// Word embeddings (columns of We) feed two gated recurrent pathways in
// parallel. The final state of the visual pathway is projected to an image
// feature vector; every state of the textual pathway predicts the next token
// through a softmax. Training minimizes
//
//   alpha · cross-entropy(next token) + (1 - alpha) · MSE(image features).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imaginet/layers.hpp"
#include "imaginet/numcore.hpp"

namespace imaginet {

class Rng;

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t image_dim = 0;  // K

  bool operator==(const ModelDims&) const = default;
  std::string describe() const;
};

/// Every learned tensor of the model.
struct ImaginetParams {
  Matrix We;  // embedding_dim × vocab_size, one column per word
  GruParams gru_visual;
  GruParams gru_textual;
  Matrix V;  // K × hidden_dim
  Matrix L;  // vocab_size × hidden_dim

  static ImaginetParams zeros(const ModelDims& dims);
  /// Uniform Glorot initialization, each matrix drawn with bound
  /// sqrt(6 / (rows + cols)) unless `scale` overrides it.
  static ImaginetParams random(const ModelDims& dims, Rng& rng,
                               std::optional<double> scale = std::nullopt);

  ModelDims dims() const;
  /// Throws ShapeError if the tensors do not describe one consistent model.
  void check_shapes() const;

  bool operator==(const ImaginetParams& o) const;
};

/// Named views of all 15 tensors in checkpoint order:
/// We, gru_visual.{Wz,Uz,Wr,Ur,W,U}, gru_textual.{Wz,Uz,Wr,Ur,W,U}, V, L.
struct NamedTensor {
  std::string_view name;
  Matrix* tensor;
};
struct NamedConstTensor {
  std::string_view name;
  const Matrix* tensor;
};
std::vector<NamedTensor> tensors(ImaginetParams& p);
std::vector<NamedConstTensor> tensors(const ImaginetParams& p);

enum class ModelVariant { Visual, Textual, Multitask };

double variant_alpha(ModelVariant v);
std::string_view variant_name(ModelVariant v);

struct LossConfig {
  double alpha = 0.1;
  std::size_t image_dim = 0;  // K
  /// Floor applied to probabilities inside the log.
  double prob_floor = 1e-12;

  static LossConfig for_variant(ModelVariant v, std::size_t image_dim);
  void validate() const;
};

struct ForwardTrace {
  std::vector<GruStepTrace> visual_traces;
  std::vector<GruStepTrace> textual_traces;
  Vector predicted_image;
  /// Entry t is the predicted distribution over the token following
  /// position t.
  std::vector<Vector> next_word_dists;
  std::size_t sentence_len = 0;
};

struct LossValue {
  double total = 0.0;
  double textual = 0.0;  // lt
  double visual = 0.0;   // lv
  /// Number of target probabilities that had to be raised to the floor.
  std::size_t clamp_events = 0;
};

struct ForwardOptions {
  ActivationConfig activation{};
  /// Skip the textual softmax entirely (used when only î is needed).
  bool skip_textual = false;
};

ForwardTrace forward(const ImaginetParams& p, std::span<const Token> sentence,
                     const ForwardOptions& opts = {});

/// lt = -(1/τ) Σ_{t=1}^{τ-1} log p(S_{t+1} | S_{1:t}),
/// lv = (1/K) Σ_k (î_k - i_k)², total = α·lt + (1-α)·lv.
LossValue loss(const ForwardTrace& trace, std::span<const Token> sentence,
               const Vector& target_image, const LossConfig& cfg);

/// Adds `scale` × the gradient of the composite loss into `grads`.
/// Pathways whose weight in the loss is zero are skipped, so their
/// gradients stay exactly zero.
void backward_accumulate(const ImaginetParams& p, const ForwardTrace& trace,
                         std::span<const Token> sentence, const Vector& target_image,
                         const LossConfig& cfg, ImaginetParams& grads, double scale = 1.0,
                         const ActivationConfig& act = {});

ImaginetParams backward(const ImaginetParams& p, const ForwardTrace& trace,
                        std::span<const Token> sentence, const Vector& target_image,
                        const LossConfig& cfg, const ActivationConfig& act = {});

/// Final visual hidden state h_τ^V, before projection.
Vector encode_visual(const ImaginetParams& p, std::span<const Token> sentence,
                     const ActivationConfig& act = {});

/// Predicted image for `word` read as a sentence on its own. With
/// `append_end`, the END sentinel `end_token` follows the word.
Vector project_word(const ImaginetParams& p, Token word, bool append_end = false,
                    Token end_token = 0, const ActivationConfig& act = {});

/// Smallest distance of any clipped-rectifier pre-activation (both GRU
/// candidates and the visual head) to a kink at clip_lo or clip_hi.
double min_kink_distance(const ImaginetParams& p, const ForwardTrace& trace,
                         const ActivationConfig& act = {});

}  // namespace imaginet
