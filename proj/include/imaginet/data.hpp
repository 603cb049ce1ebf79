#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "imaginet/layers.hpp"
#include "imaginet/numcore.hpp"

namespace imaginet {

class Rng;

/// Lowercases (ASCII), splits on whitespace and splits a trailing period off
/// each word into its own "." token.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kEnd = "<end>";

  /// UNK and END only.
  Vocabulary();

  /// Words seen at least `min_count` times, most frequent first, ties broken
  /// alphabetically. UNK is index 0 and END index 1. Throws DataError for an
  /// empty corpus and ConfigError for min_count < 1.
  static Vocabulary build(std::span<const std::vector<std::string>> corpus,
                          std::size_t min_count);

  /// Rebuilds from an explicit index→word list (as written by `save`).
  static Vocabulary from_words(std::vector<std::string> words, std::size_t min_count = 1);

  std::size_t size() const { return words_.size(); }
  Token unk_index() const { return 0; }
  Token end_index() const { return 1; }
  std::size_t min_count() const { return min_count_; }

  std::optional<Token> find(std::string_view word) const;
  Token index_or_unk(std::string_view word) const;
  const std::string& word(Token index) const;
  const std::vector<std::string>& words() const { return words_; }

  /// Maps each word to its index (UNK when unknown) and appends END.
  std::vector<Token> encode(std::span<const std::string> words) const;
  /// Inverse of encode for known words. END is dropped; UNK decodes to "<unk>".
  std::vector<std::string> decode(std::span<const Token> tokens) const;

  /// One word per line, in index order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& o) const { return words_ == o.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, Token> index_;
  std::size_t min_count_ = 1;
};

struct ScrambleOptions {
  /// If set and this token sits directly before END, it stays there.
  std::optional<Token> hold_before_end;
};

/// Uniform random permutation of every token except the final END sentinel.
std::vector<Token> scramble(std::span<const Token> tokens, Rng& rng,
                            const ScrambleOptions& opts = {});

struct RawCaption {
  std::string image_id;
  std::string caption;
};

struct CaptionRecord {
  std::string image_id;
  std::vector<Token> tokens;  // END-terminated
  Vector target;              // image features, dim K

  /// Throws DataError unless tokens are nonempty, END-terminated and the
  /// target is finite with dimension `image_dim`.
  void validate(Token end_token, std::size_t image_dim) const;
};

/// Insertion-ordered image id → feature vector store.
class FeatureStore {
 public:
  explicit FeatureStore(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  void add(std::string id, Vector features);
  const Vector* find(std::string_view id) const;
  const std::vector<std::string>& ids() const { return ids_; }
  const Vector& at(std::size_t i) const { return vectors_[i]; }

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<Vector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Captions: JSON Lines, one {"id": "...", "caption": "..."} object per line.
std::vector<RawCaption> read_captions(std::istream& is);
std::vector<RawCaption> load_captions(const std::filesystem::path& path);
void write_captions(std::ostream& os, std::span<const RawCaption> captions);
void save_captions(const std::filesystem::path& path, std::span<const RawCaption> captions);

// Features: "IMGF", u32 N, u32 K, then N × [u32 id length, id bytes, K × f32].
// All little-endian. Values are widened to double on load.
FeatureStore read_features(std::istream& is);
FeatureStore load_features(const std::filesystem::path& path);
void write_features(std::ostream& os, const FeatureStore& store);
void save_features(const std::filesystem::path& path, const FeatureStore& store);

struct JoinResult {
  std::vector<CaptionRecord> records;
  std::size_t dropped = 0;  // captions whose image id has no features
};

/// Tokenizes and encodes each caption and attaches its image's features.
JoinResult join_captions(std::span<const RawCaption> captions, const FeatureStore& features,
                         const Vocabulary& vocab);

struct SimilarityPair {
  std::string word1;
  std::string word2;
  double score;
};

/// Tab-separated word1, word2, score; '#' comment lines and blank lines are
/// skipped.
std::vector<SimilarityPair> read_similarity_benchmark(std::istream& is);
std::vector<SimilarityPair> load_similarity_benchmark(const std::filesystem::path& path);
void save_similarity_benchmark(const std::filesystem::path& path,
                               std::span<const SimilarityPair> pairs);

/// Tab-separated image id and word label, one image per line.
std::vector<std::pair<std::string, std::string>> load_image_labels(
    const std::filesystem::path& path);
void save_image_labels(const std::filesystem::path& path,
                       std::span<const std::pair<std::string, std::string>> labels);

}  // namespace imaginet
