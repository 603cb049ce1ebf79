#include "imaginet/synth.hpp"

#include <algorithm>
#include <span>

#include "imaginet/errors.hpp"
#include "imaginet/rng.hpp"

namespace imaginet {

namespace {

constexpr const char* kObjectNames[] = {
    "dog",    "cat",    "horse", "bird",   "car",    "bus",    "train", "boat",   "plane",
    "bike",   "table",  "chair", "bench",  "clock",  "phone",  "cake",  "pizza",  "kite",
    "tree",   "fence",  "wall",  "tower",  "bridge", "truck",  "sheep", "cow",    "zebra",
    "giraffe", "bear",  "lamp",  "sofa",   "bed",    "vase",   "bowl",  "cup",    "bottle",
    "laptop", "window", "door",  "umbrella"};

constexpr const char* kAttributeNames[] = {"red",   "blue",  "green", "white", "black",
                                           "brown", "small", "large", "old",   "young",
                                           "wet",   "shiny", "dark",  "bright", "wooden",
                                           "striped", "tiny", "huge", "dirty", "clean",
                                           "pink",  "yellow", "grey", "orange", "purple",
                                           "spotted", "fluffy", "metal"};

std::vector<std::string> make_names(std::span<const char* const> base, std::size_t n,
                                    const char* fallback) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(i < base.size() ? std::string(base[i])
                                  : std::string(fallback) + std::to_string(i));
  }
  return out;
}

std::string fill_template(const std::string& tpl, const std::string& attr,
                          const std::string& topic, const std::string& background) {
  std::string out;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (tpl[i] == '{' && i + 2 < tpl.size() && tpl[i + 2] == '}') {
      switch (tpl[i + 1]) {
        case 'a': out += attr; break;
        case 't': out += topic; break;
        case 'b': out += background; break;
        default: throw ConfigError("synth: bad template slot");
      }
      i += 2;
    } else {
      out.push_back(tpl[i]);
    }
  }
  return out;
}

std::string scene_id(std::size_t i) {
  std::string digits = std::to_string(i);
  return "scene" + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_objects < 2 || n_attributes < 2 || feature_dim < 2 || captions_per_scene < 1) {
    throw ConfigError("synth: object, attribute and feature counts must be at least 2");
  }
  if (n_scenes < 2) throw ConfigError("synth: n_scenes must be at least 2");
  if (val_scenes >= n_scenes) throw ConfigError("synth: val_scenes must be below n_scenes");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be nonnegative");
  if (!(order_signal_strength >= 0.0 && order_signal_strength <= 1.0)) {
    throw ConfigError("synth: order_signal_strength must lie in [0, 1]");
  }
}

const std::vector<std::string>& synth_templates() {
  static const std::vector<std::string> templates = {
      "{a} {t} near a {b} .",
      "a {a} {t} beside the {b} .",
      "the {a} {t} with a {b} .",
      "a {t} that is {a} next to a {b} .",
      "there is a {a} {t} by the {b} .",
  };
  return templates;
}

Vector scene_vector(const SynthCorpus& corpus, const SceneSpec& scene,
                    double order_signal_strength) {
  const Vector& topic = corpus.object_vectors.at(scene.topic);
  const Vector& background = corpus.object_vectors.at(scene.background);
  const Vector& gain = corpus.attribute_vectors.at(scene.attribute);
  Vector out(topic.dim());
  for (std::size_t k = 0; k < out.dim(); ++k)
    out[k] = topic[k] * gain[k] + order_signal_strength * background[k];
  return out;
}

SynthCorpus gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Rng appearance_rng = rng.split(1);
  Rng scene_rng = rng.split(2);
  Rng noise_rng = rng.split(3);

  SynthCorpus corpus;
  corpus.train.features = FeatureStore(cfg.feature_dim);
  corpus.validation.features = FeatureStore(cfg.feature_dim);
  corpus.object_words = make_names(kObjectNames, cfg.n_objects, "thing");
  corpus.attribute_words = make_names(kAttributeNames, cfg.n_attributes, "kind");

  // Objects: sparse nonnegative appearance vectors. Attributes: per-channel
  // gains applied to the topic object, which no additive model can express.
  const std::size_t K = cfg.feature_dim;
  for (std::size_t o = 0; o < cfg.n_objects; ++o) {
    Vector v(K);
    for (double& x : v) x = std::max(0.0, appearance_rng.normal());
    corpus.object_vectors.push_back(std::move(v));
  }
  for (std::size_t a = 0; a < cfg.n_attributes; ++a) {
    Vector g(K);
    for (double& x : g) x = appearance_rng.uniform(0.4, 1.6);
    corpus.attribute_vectors.push_back(std::move(g));
  }

  const auto& templates = synth_templates();
  for (std::size_t s = 0; s < cfg.n_scenes; ++s) {
    SceneSpec scene{};
    scene.topic = scene_rng.below(cfg.n_objects);
    scene.background = scene_rng.below(cfg.n_objects - 1);
    if (scene.background >= scene.topic) ++scene.background;
    scene.attribute = scene_rng.below(cfg.n_attributes);

    Vector image = scene_vector(corpus, scene, cfg.order_signal_strength);
    for (double& x : image) x = std::clamp(x + cfg.noise_sigma * noise_rng.normal(), 0.0, 5.0);

    SynthSplit& split = s < cfg.n_scenes - cfg.val_scenes ? corpus.train : corpus.validation;
    const std::string id = scene_id(s);
    const std::string& topic = corpus.object_words[scene.topic];
    for (std::size_t c = 0; c < cfg.captions_per_scene; ++c) {
      split.captions.push_back(
          {id, fill_template(templates[c % templates.size()],
                             corpus.attribute_words[scene.attribute], topic,
                             corpus.object_words[scene.background])});
    }
    split.features.add(id, std::move(image));
    split.scenes.push_back(scene);
    split.labels.emplace_back(id, topic);
  }

  for (std::size_t i = 0; i < cfg.n_objects; ++i)
    for (std::size_t j = i + 1; j < cfg.n_objects; ++j) {
      const Vector& a = corpus.object_vectors[i];
      const Vector& b = corpus.object_vectors[j];
      const double na = norm2(a.span()), nb = norm2(b.span());
      if (na == 0.0 || nb == 0.0) continue;
      corpus.similarity.push_back(
          {corpus.object_words[i], corpus.object_words[j], cosine(a, b)});
    }
  return corpus;
}

}  // namespace imaginet
