#pragma once

// Evaluation protocols: word similarity against human ratings, single-word
// image retrieval, sentence image retrieval and paraphrase retrieval, the
// latter two under original or scrambled word order.
//
// Queries are independent and fan out over OpenMP threads; per-query results
// are reduced in query order so reports do not depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imaginet/data.hpp"
#include "imaginet/numcore.hpp"

namespace imaginet {

enum class Condition { Original, Scrambled, NotApplicable };

std::string_view condition_name(Condition c);
/// Parses "original" / "scrambled"; throws ConfigError otherwise.
Condition parse_condition(std::string_view text);

struct EvalReport {
  std::string metric;
  Condition condition = Condition::NotApplicable;
  double value = 0.0;
  std::size_t n_queries = 0;
  std::size_t n_candidates = 0;
  std::uint64_t seed = 0;
  /// Queries dropped before scoring (unknown words, incomplete groups, ...).
  std::size_t n_skipped = 0;
};

/// Header line of the report TSV.
std::string report_header();
std::string report_row(const EvalReport& r);
/// Appends one row, writing the header first if the file is new or empty.
void append_report(const std::filesystem::path& path, const EvalReport& r);

/// Tie-aware (average) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> xs);

/// Pearson correlation of average-ranked data. Throws InputError for fewer
/// than 3 points or unequal lengths and UndefinedCorrelationError when
/// either series is constant.
double spearman_rho(std::span<const double> xs, std::span<const double> ys);

struct Ranking {
  std::vector<std::size_t> order;     // candidate indices, best first
  std::vector<std::size_t> excluded;  // zero-norm candidates
};

/// Candidates by descending cosine to `query`, ties by ascending index.
/// Zero-norm candidates are left out. A zero-norm query ties everything.
Ranking rank_candidates(const Vector& query, std::span<const Vector> candidates);

/// Cosine with the zero-norm convention used by the ranking: 0 when either
/// side has zero norm.
double ranking_similarity(const Vector& query, const Vector& candidate);

/// Number of candidates ranked strictly ahead of `target` under the
/// rank_candidates order. `sims` holds the query's similarity to every
/// candidate; entries flagged in `skip` do not compete.
std::size_t rank_of(std::span<const double> sims, std::size_t target,
                    std::span<const char> skip = {});

/// Indices of the `k` best candidates under the rank_candidates order.
std::vector<std::size_t> top_k(std::span<const double> sims, std::size_t k,
                               std::span<const char> skip = {});

/// Maps a word to its vector, or nullopt when the word is not covered.
using WordVectorFn = std::function<std::optional<Vector>(const std::string&)>;

/// Spearman ρ between model cosines and human scores. Pairs with an
/// uncovered word (or a zero vector) are skipped and counted. Throws
/// DataError with fewer than 3 covered pairs.
EvalReport word_similarity_eval(const WordVectorFn& word_vectors,
                                std::span<const SimilarityPair> pairs);

/// Maps an encoded sentence to a predicted image (or a sentence vector).
using SentenceFn = std::function<Vector(std::span<const Token>)>;

struct RetrievalOptions {
  std::size_t k = 5;
  Condition condition = Condition::Original;
  std::uint64_t seed = 0;
  ScrambleOptions scramble{};
};

/// Accuracy@k of retrieving each caption's own image among the unique image
/// vectors of `records`.
EvalReport image_retrieval_eval(const SentenceFn& predict, std::span<const CaptionRecord> records,
                                const RetrievalOptions& opts);

struct LabeledImage {
  Vector features;
  std::string label;
};

/// For every distinct label word in the vocabulary: project the word, rank
/// all images and score a hit if any of the top k carries that label.
EvalReport single_word_retrieval_eval(const std::function<Vector(Token)>& project,
                                      std::span<const LabeledImage> images,
                                      const Vocabulary& vocab, std::size_t k = 5);

struct ParaphraseOptions {
  std::size_t group_size = 5;
  std::size_t k = 4;
  Condition condition = Condition::Original;
  std::uint64_t seed = 0;
  ScrambleOptions scramble{};
};

/// Recall@k of a caption's paraphrases (other captions of the same image)
/// among all original captions except the query's own.
EvalReport paraphrase_retrieval_eval(const SentenceFn& encode,
                                     std::span<const CaptionRecord> records,
                                     const ParaphraseOptions& opts);

}  // namespace imaginet
