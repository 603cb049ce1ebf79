#pragma once

// Synthetic grounded-language corpus.
//
// A scene has a topic object with an attribute and a background object. Its
// captions always mention the topic before the background, so word order
// carries meaning. The image vector weights the topic (modulated by its
// attribute) by 1 and the background by `order_signal_strength`; swapping
// the two roles keeps the bag of words but changes the image.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "imaginet/data.hpp"

namespace imaginet {

struct SynthConfig {
  std::size_t n_objects = 12;
  std::size_t n_attributes = 28;
  std::size_t n_scenes = 800;  // training + validation
  std::size_t val_scenes = 400;
  std::size_t captions_per_scene = 5;
  std::size_t feature_dim = 16;  // K
  double noise_sigma = 0.1;
  double order_signal_strength = 0.3;
  std::uint64_t seed = 1;

  /// Throws ConfigError for counts below 2, negative noise or a strength
  /// outside [0, 1].
  void validate() const;
};

struct SceneSpec {
  std::size_t topic;
  std::size_t background;
  std::size_t attribute;
};

struct SynthSplit {
  std::vector<RawCaption> captions;
  FeatureStore features;
  std::vector<SceneSpec> scenes;  // parallel to features.ids()
  /// Image id → topic word, for single-word retrieval.
  std::vector<std::pair<std::string, std::string>> labels;
};

struct SynthCorpus {
  SynthSplit train;
  SynthSplit validation;
  std::vector<std::string> object_words;
  std::vector<std::string> attribute_words;
  /// Ground-truth appearance vectors, one per object / attribute.
  std::vector<Vector> object_vectors;
  std::vector<Vector> attribute_vectors;
  /// Object pairs scored by the cosine of their appearance vectors.
  std::vector<SimilarityPair> similarity;
};

SynthCorpus gen_synthetic(const SynthConfig& cfg);

/// Noise-free image of a scene under the generator's appearance model.
Vector scene_vector(const SynthCorpus& corpus, const SceneSpec& scene,
                    double order_signal_strength);

/// The caption templates, with {a} {t} {b} standing for attribute, topic and
/// background. Exposed for tests.
const std::vector<std::string>& synth_templates();

}  // namespace imaginet
