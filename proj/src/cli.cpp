#include "imaginet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "imaginet/baseline.hpp"
#include "imaginet/checkpoint.hpp"
#include "imaginet/data.hpp"
#include "imaginet/errors.hpp"
#include "imaginet/eval.hpp"
#include "imaginet/model.hpp"
#include "imaginet/optim.hpp"
#include "imaginet/rng.hpp"
#include "imaginet/synth.hpp"
#include "imaginet/train.hpp"

namespace imaginet::cli {

namespace fs = std::filesystem;

namespace {

struct OptionSpec {
  const char* key;
  const char* help;
};

// Every key may appear as --key on the command line or as key=value in a
// config file.
const std::vector<OptionSpec> kTrainOptions = {
    {"variant", "visual|textual|multitask|linreg"},
    {"alpha", "override the variant's textual loss weight"},
    {"embedding-dim", "word embedding size"},
    {"hidden-dim", "GRU state size"},
    {"image-dim", "image feature dimension K"},
    {"epochs", "training epochs"},
    {"batch-size", "examples per Adam step"},
    {"lr", "Adam learning rate"},
    {"beta1", "Adam first-moment decay"},
    {"beta2", "Adam second-moment decay"},
    {"eps", "Adam epsilon"},
    {"max-grad-norm", "global gradient norm cap, 0 disables"},
    {"init-scale", "uniform init bound (default: Glorot per matrix)"},
    {"seed", "random seed"},
    {"min-count", "vocabulary frequency threshold"},
    {"lambda", "ridge penalty for linreg (default: validation grid or 1.0)"},
    {"captions", "training captions (JSON Lines)"},
    {"features", "training image features (IMGF)"},
    {"val-captions", "validation captions, used to pick the ridge penalty"},
    {"val-features", "validation image features"},
    {"checkpoint", "output checkpoint path"},
    {"loss-log", "loss curve TSV (default: <checkpoint>.loss.tsv)"},
};

const std::vector<OptionSpec> kEvalOptions = {
    {"which", "retrieval|word-retrieval|similarity|paraphrase"},
    {"condition", "original|scrambled"},
    {"checkpoint", "model or linreg checkpoint"},
    {"captions", "evaluation captions (JSON Lines)"},
    {"features", "evaluation image features (IMGF)"},
    {"benchmark", "word similarity TSV"},
    {"labels", "image id -> label TSV for word retrieval"},
    {"report", "report TSV to append to (default: stdout)"},
    {"seed", "evaluation seed for scrambling"},
    {"top-k", "cutoff k (default 5 for images, 4 for paraphrases)"},
    {"group-size", "captions per image for paraphrase retrieval"},
    {"append-end", "feed END after a projected word (true|false)"},
    {"hold-period", "keep a final period in place when scrambling (true|false)"},
    {"embedding-dim", "expected embedding size"},
    {"hidden-dim", "expected GRU state size"},
    {"image-dim", "expected image feature dimension"},
};

const std::vector<OptionSpec> kSynthOptions = {
    {"out-dir", "output directory"},
    {"seed", "random seed"},
    {"n-objects", "object vocabulary size"},
    {"n-attributes", "attribute vocabulary size"},
    {"n-scenes", "scenes in total"},
    {"val-scenes", "scenes held out for validation"},
    {"captions-per-scene", "paraphrases per scene"},
    {"image-dim", "feature dimension K"},
    {"noise-sigma", "Gaussian feature noise"},
    {"order-signal-strength", "background weight in the image"},
    {"min-count", "threshold used for reported vocabulary statistics"},
};

const std::vector<OptionSpec> kGradcheckOptions = {
    {"vocab-size", "vocabulary size"},
    {"embedding-dim", "embedding size"},
    {"hidden-dim", "GRU state size"},
    {"image-dim", "image feature dimension"},
    {"sentence-len", "tokens per instance"},
    {"instances", "random instances to check"},
    {"epsilon", "finite difference step"},
    {"variant", "visual|textual|multitask"},
    {"alpha", "override the textual loss weight"},
    {"seed", "random seed"},
};

class SettingsView {
 public:
  explicit SettingsView(Settings s) : s_(std::move(s)) {}

  bool has(const std::string& key) const { return s_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) const {
    const auto it = s_.find(key);
    return it == s_.end() ? fallback : it->second;
  }

  std::string required(const std::string& key) const {
    const auto it = s_.find(key);
    if (it == s_.end() || it->second.empty()) throw ConfigError("missing required --" + key);
    return it->second;
  }

  double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = s_.at(key);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used == v.size() && std::isfinite(x)) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("--" + key + ": not a number: '" + v + "'");
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = s_.at(key);
    try {
      std::size_t used = 0;
      if (!v.empty() && v.front() != '-') {
        const unsigned long long x = std::stoull(v, &used);
        if (used == v.size()) return x;
      }
    } catch (const std::exception&) {
    }
    throw ConfigError("--" + key + ": not a nonnegative integer: '" + v + "'");
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = s_.at(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("--" + key + ": expected true or false, got '" + v + "'");
  }

 private:
  Settings s_;
};

/// Registers --key string options; values given on the command line end up
/// in `flags`.
struct OptionBinder {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void bind(CLI::App* app, const std::vector<OptionSpec>& specs) {
    for (const OptionSpec& spec : specs) {
      auto* opt = app->add_option("--" + std::string(spec.key), values[spec.key], spec.help);
      options.emplace_back(spec.key, opt);
    }
  }

  Settings given() const {
    Settings s;
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) s[key] = values.at(key);
    return s;
  }
};

void overlay(Settings& base, const Settings& top) {
  for (const auto& [k, v] : top) base[k] = v;
}

void check_known_keys(const Settings& s, const std::vector<OptionSpec>& specs,
                      const std::string& source) {
  for (const auto& [key, value] : s) {
    const bool known = std::any_of(specs.begin(), specs.end(),
                                   [&](const OptionSpec& o) { return key == o.key; });
    if (!known) throw ConfigError(source + ": unknown setting '" + key + "'");
  }
}

Settings layered(const std::vector<OptionSpec>& specs, const std::string& preset_name,
                 const std::string& config_path, const Settings& flags, bool use_preset) {
  Settings s;
  if (use_preset) {
    Settings p = preset(preset_name);
    for (auto it = p.begin(); it != p.end();) {
      const bool known = std::any_of(specs.begin(), specs.end(),
                                     [&](const OptionSpec& o) { return it->first == o.key; });
      it = known ? std::next(it) : p.erase(it);
    }
    overlay(s, p);
  }
  if (!config_path.empty()) {
    const Settings file = read_config_file(config_path);
    check_known_keys(file, specs, config_path);
    overlay(s, file);
  }
  overlay(s, flags);
  return s;
}

std::string join_path(const fs::path& p, const char* suffix) { return p.string() + suffix; }

// ---------------------------------------------------------------- synth

int cmd_synth(const SettingsView& s, std::ostream& out) {
  SynthConfig cfg;
  cfg.seed = s.count("seed", cfg.seed);
  cfg.n_objects = s.count("n-objects", cfg.n_objects);
  cfg.n_attributes = s.count("n-attributes", cfg.n_attributes);
  cfg.n_scenes = s.count("n-scenes", cfg.n_scenes);
  cfg.val_scenes = s.count("val-scenes", cfg.val_scenes);
  cfg.captions_per_scene = s.count("captions-per-scene", cfg.captions_per_scene);
  cfg.feature_dim = s.count("image-dim", cfg.feature_dim);
  cfg.noise_sigma = s.real("noise-sigma", cfg.noise_sigma);
  cfg.order_signal_strength = s.real("order-signal-strength", cfg.order_signal_strength);
  cfg.validate();
  const std::size_t min_count = s.count("min-count", 5);

  const fs::path dir = s.required("out-dir");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const SynthCorpus corpus = gen_synthetic(cfg);
  save_captions(dir / "train.jsonl", corpus.train.captions);
  save_features(dir / "train.feat", corpus.train.features);
  save_captions(dir / "val.jsonl", corpus.validation.captions);
  save_features(dir / "val.feat", corpus.validation.features);
  save_image_labels(dir / "val.labels.tsv", corpus.validation.labels);
  save_similarity_benchmark(dir / "similarity.tsv", corpus.similarity);

  std::vector<std::vector<std::string>> tokenized;
  for (const RawCaption& c : corpus.train.captions) tokenized.push_back(tokenize(c.caption));
  const Vocabulary vocab = Vocabulary::build(tokenized, min_count);
  std::size_t tokens = 0;
  for (const auto& t : tokenized) tokens += t.size();

  out << "train_captions\t" << corpus.train.captions.size() << '\n'
      << "train_images\t" << corpus.train.features.size() << '\n'
      << "val_captions\t" << corpus.validation.captions.size() << '\n'
      << "val_images\t" << corpus.validation.features.size() << '\n'
      << "train_tokens\t" << tokens << '\n'
      << "vocab_size\t" << vocab.size() << " (min_count=" << min_count << ")\n"
      << "image_dim\t" << cfg.feature_dim << '\n';
  return kOk;
}

// ---------------------------------------------------------------- train

struct LoadedData {
  Vocabulary vocab;
  std::vector<CaptionRecord> records;
};

std::vector<CaptionRecord> load_records(const fs::path& captions, const fs::path& features,
                                        const Vocabulary& vocab, std::ostream& err) {
  const auto raw = load_captions(captions);
  const FeatureStore store = load_features(features);
  JoinResult joined = join_captions(raw, store, vocab);
  if (joined.dropped > 0) {
    err << "warning: " << joined.dropped << " caption(s) without image features dropped\n";
  }
  return std::move(joined.records);
}

ModelVariant parse_variant(const std::string& v) {
  if (v == "visual") return ModelVariant::Visual;
  if (v == "textual") return ModelVariant::Textual;
  if (v == "multitask") return ModelVariant::Multitask;
  throw ConfigError("unknown variant '" + v + "' (visual|textual|multitask|linreg)");
}

void write_loss_log(const fs::path& path, const std::vector<EpochStats>& history) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "epoch\tlt\tlv\ttotal\n";
  os << std::setprecision(17);
  for (const EpochStats& e : history)
    os << e.epoch << '\t' << e.textual << '\t' << e.visual << '\t' << e.total << '\n';
}

int train_linreg(const SettingsView& s, const Vocabulary& vocab,
                 const std::vector<CaptionRecord>& records, const fs::path& checkpoint,
                 std::ostream& out, std::ostream& err) {
  auto [X, Y] = linreg_design(records, vocab.size(), vocab.end_index());
  LinRegParams params;
  double lambda = kDefaultRidgeLambda;
  if (s.has("lambda")) {
    lambda = s.real("lambda", lambda);
    params = fit_ridge(X, Y, lambda);
  } else if (s.has("val-captions") && s.has("val-features")) {
    const auto val = load_records(s.required("val-captions"), s.required("val-features"), vocab, err);
    if (val.empty()) throw DataError("linreg: validation split is empty");
    auto [Xv, Yv] = linreg_design(val, vocab.size(), vocab.end_index());
    RidgeSelection sel = select_ridge(X, Y, Xv, Yv, kRidgeLambdaGrid);
    lambda = sel.lambda;
    params = std::move(sel.params);
    out << "selected lambda " << lambda << " (validation MSE " << sel.validation_mse << ")\n";
  } else {
    params = fit_ridge(X, Y, lambda);
  }
  if (!all_finite(params.A) || !all_finite(params.b)) throw NumericalError("linreg: non-finite fit");

  save_linreg(checkpoint, params);
  vocab.save(vocab_path(checkpoint));
  const double mse = ridge_objective(params, X, Y, 0.0) /
                     static_cast<double>(X.rows() * Y.cols());
  write_loss_log(s.str("loss-log", join_path(checkpoint, ".loss.tsv")),
                 {EpochStats{1, 0.0, mse, mse, 0}});
  out << "linreg lambda=" << lambda << " train_mse=" << mse << " -> " << checkpoint.string() << '\n';
  return kOk;
}

int cmd_train(const SettingsView& s, std::ostream& out, std::ostream& err) {
  const std::string variant = s.str("variant", "multitask");
  const fs::path checkpoint = s.required("checkpoint");
  const std::size_t min_count = s.count("min-count", 5);
  if (min_count < 1) throw ConfigError("--min-count must be at least 1");

  const auto raw = load_captions(s.required("captions"));
  const FeatureStore store = load_features(s.required("features"));
  std::vector<std::vector<std::string>> tokenized;
  for (const RawCaption& c : raw)
    if (store.find(c.image_id)) tokenized.push_back(tokenize(c.caption));
  if (tokenized.empty()) throw DataError("train: no caption joins an image feature vector");
  const Vocabulary vocab = Vocabulary::build(tokenized, min_count);
  JoinResult joined = join_captions(raw, store, vocab);
  if (joined.dropped > 0) err << "warning: " << joined.dropped << " caption(s) without features dropped\n";
  const auto& records = joined.records;

  const std::size_t K = store.dim();
  if (s.has("image-dim") && s.count("image-dim", K) != K) {
    throw ArtifactMismatchError("configured image-dim " + s.str("image-dim", "") +
                                " but features have dimension " + std::to_string(K));
  }

  if (variant == "linreg") return train_linreg(s, vocab, records, checkpoint, out, err);

  const ModelVariant v = parse_variant(variant);
  TrainConfig cfg;
  cfg.loss = LossConfig::for_variant(v, K);
  if (s.has("alpha")) cfg.loss.alpha = s.real("alpha", cfg.loss.alpha);
  cfg.loss.validate();
  cfg.epochs = s.count("epochs", 8);
  cfg.batch_size = s.count("batch-size", 32);
  cfg.seed = s.count("seed", 1);
  cfg.adam.lr = s.real("lr", cfg.adam.lr);
  cfg.adam.beta1 = s.real("beta1", cfg.adam.beta1);
  cfg.adam.beta2 = s.real("beta2", cfg.adam.beta2);
  cfg.adam.eps = s.real("eps", cfg.adam.eps);
  cfg.max_grad_norm = s.real("max-grad-norm", 0.0);
  if (cfg.epochs < 1) throw ConfigError("--epochs must be at least 1");
  if (cfg.batch_size < 1) throw ConfigError("--batch-size must be at least 1");

  ModelDims dims{vocab.size(), s.count("embedding-dim", 1024), s.count("hidden-dim", 1024), K};
  if (dims.embedding_dim < 1 || dims.hidden_dim < 1) throw ConfigError("dimensions must be at least 1");
  Rng init_rng = Rng(cfg.seed).split(0);
  std::optional<double> init_scale;
  if (s.has("init-scale")) init_scale = s.real("init-scale", 0.1);
  ImaginetParams params = ImaginetParams::random(dims, init_rng, init_scale);
  cfg.seed = mix_seed(cfg.seed, 1);

  out << "training " << variant << " alpha=" << cfg.loss.alpha << " " << dims.describe() << " on "
      << records.size() << " captions\n";
  vocab.save(vocab_path(checkpoint));
  const auto history = train_model(params, records, cfg, [&](const EpochStats& e, const ImaginetParams& p) {
    save_model(epoch_checkpoint_path(checkpoint, e.epoch), p);
    out << "epoch " << e.epoch << "\tlt=" << e.textual << "\tlv=" << e.visual
        << "\ttotal=" << e.total << '\n';
    if (e.clamp_events > 0) err << "note: " << e.clamp_events << " probability clamp event(s)\n";
  });
  save_model(checkpoint, params);
  write_loss_log(s.str("loss-log", join_path(checkpoint, ".loss.tsv")), history);
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const SettingsView& s, bool inject_bug, std::ostream& out) {
  ModelDims dims{s.count("vocab-size", 11), s.count("embedding-dim", 5), s.count("hidden-dim", 7),
                 s.count("image-dim", 4)};
  for (std::size_t d : {dims.vocab_size, dims.embedding_dim, dims.hidden_dim, dims.image_dim}) {
    if (d < 1 || d > 16) throw ConfigError("gradcheck: dimensions must lie in [1, 16]");
  }
  const std::size_t len = s.count("sentence-len", 3);
  const std::size_t instances = s.count("instances", 20);
  if (len < 1 || len > 16) throw ConfigError("gradcheck: sentence-len must lie in [1, 16]");
  LossConfig cfg = LossConfig::for_variant(parse_variant(s.str("variant", "multitask")), dims.image_dim);
  if (s.has("alpha")) cfg.alpha = s.real("alpha", cfg.alpha);
  cfg.validate();
  GradCheckOptions opts;
  opts.epsilon = s.real("epsilon", 1e-5);
  const std::uint64_t seed = s.count("seed", 1);

  Rng rng(seed);
  std::map<std::string, double> worst;
  std::vector<std::string> order;
  double overall = 0.0;
  std::size_t resampled = 0;
  for (std::size_t inst = 0; inst < instances; ++inst) {
    GradCheckInstance gi = sample_gradcheck_instance(dims, len, rng);
    resampled += gi.resampled;
    ImaginetParams& params = gi.params;
    const auto& sentence = gi.sentence;
    const Vector& target = gi.target;
    const ForwardTrace trace = forward(params, sentence);
    ImaginetParams grads = backward(params, trace, sentence, target, cfg);
    if (inject_bug) {
      for (double& g : grads.gru_visual.U.span()) g *= 2.0;
    }
    opts.seed = mix_seed(seed, inst);
    const auto report = grad_check(
        [&](const ImaginetParams& p) { return loss(forward(p, sentence), sentence, target, cfg).total; },
        params, grads, opts);
    for (const TensorGradError& t : report.tensors) {
      if (!worst.count(t.name)) order.push_back(t.name);
      worst[t.name] = std::max(worst[t.name], t.max_rel_error);
    }
    overall = std::max(overall, report.max_rel_error);
  }

  out << "tensor\tmax_rel_error\n";
  out << std::scientific << std::setprecision(3);
  for (const std::string& name : order) out << name << '\t' << worst[name] << '\n';
  out << "overall\t" << overall << '\n';
  out << std::defaultfloat;
  out << "instances\t" << instances << "\tresampled\t" << resampled << "\talpha\t" << cfg.alpha << '\n';
  const bool pass = overall < 1e-4;
  out << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kOk : kGradCheck;
}

// ---------------------------------------------------------------- eval

void expect_dim(const SettingsView& s, const std::string& key, std::size_t actual,
                const std::string& what) {
  if (s.has(key) && s.count(key, actual) != actual) {
    throw ArtifactMismatchError("--" + key + "=" + s.str(key, "") + " but " + what + " has " +
                                std::to_string(actual));
  }
}

int cmd_eval(const SettingsView& s, std::ostream& out, std::ostream& err) {
  const std::string which = s.required("which");
  const fs::path checkpoint = s.required("checkpoint");
  const Condition condition = parse_condition(s.str("condition", "original"));
  const std::uint64_t seed = s.count("seed", 0);
  const bool append_end = s.flag("append-end", false);
  const bool hold_period = s.flag("hold-period", false);
  if (which != "retrieval" && which != "word-retrieval" && which != "similarity" &&
      which != "paraphrase") {
    throw ConfigError("unknown --which '" + which + "'");
  }

  const CheckpointKind kind = peek_checkpoint_kind(checkpoint);
  const Vocabulary vocab = Vocabulary::load(vocab_path(checkpoint));
  std::optional<ImaginetParams> model;
  std::optional<LinRegParams> linreg;
  std::size_t K = 0;
  if (kind == CheckpointKind::Model) {
    model = load_model(checkpoint);
    const ModelDims d = model->dims();
    K = d.image_dim;
    expect_dim(s, "embedding-dim", d.embedding_dim, "checkpoint");
    expect_dim(s, "hidden-dim", d.hidden_dim, "checkpoint");
    if (d.vocab_size != vocab.size()) {
      throw ArtifactMismatchError("checkpoint vocabulary " + std::to_string(d.vocab_size) +
                                  " but vocabulary file has " + std::to_string(vocab.size()));
    }
  } else {
    linreg = load_linreg(checkpoint);
    K = linreg->image_dim();
    if (linreg->vocab_size() != vocab.size()) {
      throw ArtifactMismatchError("checkpoint vocabulary " + std::to_string(linreg->vocab_size()) +
                                  " but vocabulary file has " + std::to_string(vocab.size()));
    }
  }
  expect_dim(s, "image-dim", K, "checkpoint");

  const SentenceFn predict_image = [&](std::span<const Token> tokens) -> Vector {
    if (model) {
      ForwardOptions fo;
      fo.skip_textual = true;
      return forward(*model, tokens, fo).predicted_image;
    }
    return predict(*linreg, bow(tokens, vocab.size(), vocab.end_index()));
  };
  ScrambleOptions scramble_opts;
  if (hold_period) scramble_opts.hold_before_end = vocab.find(".");

  const auto load_features_checked = [&]() {
    FeatureStore store = load_features(s.required("features"));
    if (store.size() > 0 && store.dim() != K) {
      throw ArtifactMismatchError("features have dimension " + std::to_string(store.dim()) +
                                  " but checkpoint K=" + std::to_string(K));
    }
    return store;
  };

  EvalReport report;
  if (which == "retrieval") {
    const FeatureStore store = load_features_checked();
    JoinResult joined = join_captions(load_captions(s.required("captions")), store, vocab);
    if (joined.dropped > 0) err << "warning: " << joined.dropped << " caption(s) dropped\n";
    RetrievalOptions opts{s.count("top-k", 5), condition, seed, scramble_opts};
    report = image_retrieval_eval(predict_image, joined.records, opts);
  } else if (which == "paraphrase") {
    std::vector<CaptionRecord> records;
    for (const RawCaption& c : load_captions(s.required("captions")))
      records.push_back({c.image_id, vocab.encode(tokenize(c.caption)), Vector()});
    ParaphraseOptions opts{s.count("group-size", 5), s.count("top-k", 4), condition, seed,
                           scramble_opts};
    const SentenceFn encode = [&](std::span<const Token> tokens) -> Vector {
      return model ? encode_visual(*model, tokens) : predict_image(tokens);
    };
    report = paraphrase_retrieval_eval(encode, records, opts);
  } else if (which == "word-retrieval") {
    const FeatureStore store = load_features_checked();
    std::vector<LabeledImage> images;
    for (const auto& [id, label] : load_image_labels(s.required("labels"))) {
      const Vector* f = store.find(id);
      if (f == nullptr) throw DataError("labels: image '" + id + "' has no features");
      images.push_back({*f, label});
    }
    const auto project = [&](Token w) -> Vector {
      if (model) return project_word(*model, w, append_end, vocab.end_index());
      Vector x = linreg->b;
      for (std::size_t k = 0; k < K; ++k) x[k] += linreg->A(k, w);
      return x;
    };
    report = single_word_retrieval_eval(project, images, vocab, s.count("top-k", 5));
    report.seed = seed;
  } else {
    const auto pairs = load_similarity_benchmark(s.required("benchmark"));
    const WordVectorFn vectors = [&](const std::string& w) -> std::optional<Vector> {
      const auto idx = vocab.find(w);
      if (!idx) return std::nullopt;
      return model ? model->We.column(*idx) : linreg->A.column(*idx);
    };
    report = word_similarity_eval(vectors, pairs);
    report.seed = seed;
  }
  if (report.n_skipped > 0) err << "note: " << report.n_skipped << " item(s) skipped\n";

  if (s.has("report")) {
    append_report(s.str("report", ""), report);
  } else {
    out << report_header() << '\n' << report_row(report) << '\n';
  }
  return kOk;
}

}  // namespace

Settings read_config_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  Settings s;
  std::string line;
  std::size_t line_no = 0;
  const auto trim = [](std::string x) {
    const auto b = x.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = x.find_last_not_of(" \t\r");
    return x.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    s[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return s;
}

Settings preset(const std::string& name) {
  if (name == "full") {
    return {{"embedding-dim", "1024"}, {"hidden-dim", "1024"}, {"epochs", "8"},
            {"batch-size", "32"},      {"lr", "0.0002"},       {"min-count", "5"}};
  }
  if (name == "desk") {
    return {{"embedding-dim", "32"}, {"hidden-dim", "32"}, {"epochs", "8"},
            {"batch-size", "32"},    {"lr", "0.005"},      {"min-count", "5"}};
  }
  throw ConfigError("unknown preset '" + name + "' (desk|full)");
}

fs::path epoch_checkpoint_path(const fs::path& final_path, std::size_t epoch) {
  fs::path p = final_path;
  const std::string ext = p.extension().string();
  p.replace_filename(p.stem().string() + ".epoch" + std::to_string(epoch) + ext);
  return p;
}

fs::path vocab_path(const fs::path& checkpoint) { return checkpoint.string() + ".vocab"; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-pathway grounded language model: synthetic data, training, evaluation"};
  app.require_subcommand(1);

  std::string preset_name = "full", config_path;
  bool inject_bug = false;

  OptionBinder synth_opts, train_opts, gradcheck_opts, eval_opts;
  auto* synth = app.add_subcommand("synth", "write a synthetic caption/feature corpus");
  synth_opts.bind(synth, kSynthOptions);
  synth->add_option("--config", config_path, "key=value settings file");

  auto* train = app.add_subcommand("train", "train a model variant or the linreg baseline");
  train_opts.bind(train, kTrainOptions);
  train->add_option("--preset", preset_name, "desk|full defaults")->capture_default_str();
  train->add_option("--config", config_path, "key=value settings file");

  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");
  gradcheck_opts.bind(gradcheck, kGradcheckOptions);
  gradcheck->add_option("--config", config_path, "key=value settings file");
  gradcheck->add_flag("--inject-bug", inject_bug, "corrupt one gradient tensor (detector test)")
      ->group("");

  auto* eval = app.add_subcommand("eval", "run an evaluation protocol and append a report row");
  eval_opts.bind(eval, kEvalOptions);
  eval->add_option("--config", config_path, "key=value settings file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kConfig;
  }

  try {
    if (synth->parsed()) {
      return cmd_synth(SettingsView(layered(kSynthOptions, "", config_path, synth_opts.given(), false)), out);
    }
    if (train->parsed()) {
      return cmd_train(SettingsView(layered(kTrainOptions, preset_name, config_path, train_opts.given(), true)),
                       out, err);
    }
    if (gradcheck->parsed()) {
      return cmd_gradcheck(
          SettingsView(layered(kGradcheckOptions, "", config_path, gradcheck_opts.given(), false)),
          inject_bug, out);
    }
    return cmd_eval(SettingsView(layered(kEvalOptions, "", config_path, eval_opts.given(), false)), out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ArtifactMismatchError& e) {
    err << "mismatch: " << e.what() << '\n';
    return kMismatch;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace imaginet::cli
