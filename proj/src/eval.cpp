#include "imaginet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "imaginet/errors.hpp"
#include "imaginet/rng.hpp"

namespace imaginet {

namespace {

bool ranks_ahead(double sim_a, std::size_t a, double sim_b, std::size_t b) {
  return sim_a > sim_b || (sim_a == sim_b && a < b);
}

/// Scrambled copies of every caption, drawn in record order from one stream.
std::vector<std::vector<Token>> query_tokens(std::span<const CaptionRecord> records,
                                             Condition condition, std::uint64_t seed,
                                             const ScrambleOptions& scramble_opts) {
  std::vector<std::vector<Token>> out;
  out.reserve(records.size());
  Rng rng(seed);
  for (const CaptionRecord& r : records) {
    out.push_back(condition == Condition::Scrambled ? scramble(r.tokens, rng, scramble_opts)
                                                    : r.tokens);
  }
  return out;
}

/// Runs `fn(i)` for every query in parallel. Exceptions are rethrown on the
/// calling thread, first failing query first.
template <typename Fn>
void for_each_query(std::size_t n, Fn&& fn) {
  std::vector<std::string> failures(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }
  for (const std::string& f : failures)
    if (!f.empty()) throw InputError(f);
}

std::vector<double> similarities(const Vector& query, std::span<const Vector> candidates) {
  std::vector<double> sims(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j)
    sims[j] = ranking_similarity(query, candidates[j]);
  return sims;
}

}  // namespace

std::string_view condition_name(Condition c) {
  switch (c) {
    case Condition::Original: return "original";
    case Condition::Scrambled: return "scrambled";
    case Condition::NotApplicable: return "n/a";
  }
  return "n/a";
}

Condition parse_condition(std::string_view text) {
  if (text == "original") return Condition::Original;
  if (text == "scrambled") return Condition::Scrambled;
  throw ConfigError("unknown condition '" + std::string(text) + "' (original|scrambled)");
}

std::string report_header() { return "metric\tcondition\tvalue\tn_queries\tn_candidates\tseed"; }

std::string report_row(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.metric << '\t' << condition_name(r.condition) << '\t' << r.value << '\t' << r.n_queries
     << '\t' << r.n_candidates << '\t' << r.seed;
  return os.str();
}

void append_report(const std::filesystem::path& path, const EvalReport& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream os(path, std::ios::binary | std::ios::app);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  if (fresh) os << report_header() << '\n';
  os << report_row(r) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    // Positions i..j share the mean of ranks i+1..j+1.
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InputError("spearman_rho: series differ in length");
  if (xs.size() < 3) throw InputError("spearman_rho: need at least 3 points");
  const auto rx = average_ranks(xs), ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelationError("spearman_rho: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double ranking_similarity(const Vector& query, const Vector& candidate) {
  const double nq = norm2(query.span()), nc = norm2(candidate.span());
  if (nq == 0.0 || nc == 0.0) return 0.0;
  return std::clamp(dot(query.span(), candidate.span()) / (nq * nc), -1.0, 1.0);
}

Ranking rank_candidates(const Vector& query, std::span<const Vector> candidates) {
  Ranking out;
  std::vector<double> sims(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (candidates[j].dim() != query.dim()) throw ShapeError("rank_candidates: dimension mismatch");
    if (norm2(candidates[j].span()) == 0.0) {
      out.excluded.push_back(j);
      continue;
    }
    sims[j] = ranking_similarity(query, candidates[j]);
    out.order.push_back(j);
  }
  std::sort(out.order.begin(), out.order.end(),
            [&](std::size_t a, std::size_t b) { return ranks_ahead(sims[a], a, sims[b], b); });
  if (!out.excluded.empty()) {
    std::cerr << "warning: " << out.excluded.size() << " zero-norm candidate(s) excluded\n";
  }
  return out;
}

std::size_t rank_of(std::span<const double> sims, std::size_t target, std::span<const char> skip) {
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < sims.size(); ++j) {
    if (j == target || (!skip.empty() && skip[j])) continue;
    if (ranks_ahead(sims[j], j, sims[target], target)) ++ahead;
  }
  return ahead;
}

std::vector<std::size_t> top_k(std::span<const double> sims, std::size_t k,
                               std::span<const char> skip) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < sims.size(); ++j)
    if (skip.empty() || !skip[j]) idx.push_back(j);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return ranks_ahead(sims[a], a, sims[b], b); });
  idx.resize(k);
  return idx;
}

EvalReport word_similarity_eval(const WordVectorFn& word_vectors,
                                std::span<const SimilarityPair> pairs) {
  std::vector<double> model, human;
  for (const SimilarityPair& p : pairs) {
    const auto a = word_vectors(p.word1);
    const auto b = word_vectors(p.word2);
    if (!a || !b || norm2(a->span()) == 0.0 || norm2(b->span()) == 0.0) continue;
    model.push_back(cosine(*a, *b));
    human.push_back(p.score);
  }
  if (model.size() < 3) {
    throw DataError("word_similarity_eval: only " + std::to_string(model.size()) +
                    " covered pairs, need at least 3");
  }
  EvalReport r;
  r.metric = "word_similarity_spearman";
  r.value = spearman_rho(model, human);
  r.n_queries = model.size();
  r.n_candidates = pairs.size();
  r.n_skipped = pairs.size() - model.size();
  return r;
}

EvalReport image_retrieval_eval(const SentenceFn& predict, std::span<const CaptionRecord> records,
                                const RetrievalOptions& opts) {
  // Candidate pool: one vector per distinct image, in first-seen order.
  std::vector<Vector> images;
  std::vector<std::size_t> image_of(records.size());
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto [it, fresh] = seen.emplace(records[i].image_id, images.size());
    if (fresh) images.push_back(records[i].target);
    image_of[i] = it->second;
  }
  if (opts.k < 1 || opts.k > images.size()) {
    throw ConfigError("image_retrieval_eval: k=" + std::to_string(opts.k) + " but only " +
                      std::to_string(images.size()) + " candidate images");
  }
  std::vector<char> skip(images.size(), 0);
  for (std::size_t j = 0; j < images.size(); ++j) skip[j] = norm2(images[j].span()) == 0.0;

  const auto queries = query_tokens(records, opts.condition, opts.seed, opts.scramble);
  std::vector<char> hit(records.size(), 0);
  for_each_query(records.size(), [&](std::size_t q) {
    const Vector predicted = predict(queries[q]);
    const auto sims = similarities(predicted, images);
    hit[q] = !skip[image_of[q]] && rank_of(sims, image_of[q], skip) < opts.k;
  });

  EvalReport r;
  r.metric = "image_retrieval_accuracy@" + std::to_string(opts.k);
  r.condition = opts.condition;
  r.n_queries = records.size();
  r.n_candidates = images.size();
  r.seed = opts.seed;
  const double hits = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
  r.value = records.empty() ? 0.0 : hits / static_cast<double>(records.size());
  return r;
}

EvalReport single_word_retrieval_eval(const std::function<Vector(Token)>& project,
                                      std::span<const LabeledImage> images,
                                      const Vocabulary& vocab, std::size_t k) {
  if (k < 1 || k > images.size()) {
    throw ConfigError("single_word_retrieval_eval: k=" + std::to_string(k) + " but only " +
                      std::to_string(images.size()) + " images");
  }
  std::vector<std::string> labels;
  std::set<std::string> distinct;
  for (const LabeledImage& img : images)
    if (distinct.insert(img.label).second) labels.push_back(img.label);

  std::vector<std::string> covered;
  std::size_t skipped = 0;
  for (const std::string& w : labels) {
    if (vocab.find(w)) covered.push_back(w);
    else ++skipped;
  }
  if (skipped > 0) std::cerr << "warning: " << skipped << " label(s) not in vocabulary\n";

  std::vector<Vector> vectors;
  std::vector<char> skip(images.size(), 0);
  for (std::size_t j = 0; j < images.size(); ++j) {
    vectors.push_back(images[j].features);
    skip[j] = norm2(images[j].features.span()) == 0.0;
  }

  std::vector<char> hit(covered.size(), 0);
  for_each_query(covered.size(), [&](std::size_t q) {
    const Vector predicted = project(*vocab.find(covered[q]));
    const auto sims = similarities(predicted, vectors);
    for (std::size_t j : top_k(sims, k, skip))
      if (images[j].label == covered[q]) {
        hit[q] = 1;
        break;
      }
  });

  EvalReport r;
  r.metric = "word_image_retrieval_accuracy@" + std::to_string(k);
  r.n_queries = covered.size();
  r.n_candidates = images.size();
  r.n_skipped = skipped;
  const double hits = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
  r.value = covered.empty() ? 0.0 : hits / static_cast<double>(covered.size());
  return r;
}

EvalReport paraphrase_retrieval_eval(const SentenceFn& encode,
                                     std::span<const CaptionRecord> records,
                                     const ParaphraseOptions& opts) {
  if (opts.group_size < 2) throw ConfigError("paraphrase_retrieval_eval: group_size must be >= 2");

  std::map<std::string, std::vector<std::size_t>> by_image;
  std::vector<std::string> first_seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& members = by_image[records[i].image_id];
    if (members.empty()) first_seen.push_back(records[i].image_id);
    members.push_back(i);
  }
  std::vector<CaptionRecord> kept;
  std::vector<std::size_t> group;
  std::size_t dropped = 0;
  for (std::size_t g = 0; g < first_seen.size(); ++g) {
    const auto& members = by_image[first_seen[g]];
    if (members.size() != opts.group_size) {
      dropped += members.size();
      continue;
    }
    for (std::size_t i : members) {
      kept.push_back(records[i]);
      group.push_back(g);
    }
  }
  if (dropped > 0) std::cerr << "warning: " << dropped << " caption(s) outside complete groups dropped\n";
  if (kept.empty()) throw DataError("paraphrase_retrieval_eval: no complete caption groups");
  if (opts.k < 1 || opts.k > kept.size() - 1) {
    throw ConfigError("paraphrase_retrieval_eval: k=" + std::to_string(opts.k) + " but only " +
                      std::to_string(kept.size() - 1) + " candidates");
  }

  std::vector<Vector> originals(kept.size());
  for_each_query(kept.size(), [&](std::size_t i) { originals[i] = encode(kept[i].tokens); });
  std::vector<char> skip(kept.size(), 0);
  for (std::size_t j = 0; j < kept.size(); ++j) skip[j] = norm2(originals[j].span()) == 0.0;

  const auto queries = query_tokens(kept, opts.condition, opts.seed, opts.scramble);
  std::vector<double> recall(kept.size(), 0.0);
  const double relevant_total = static_cast<double>(opts.group_size - 1);
  for_each_query(kept.size(), [&](std::size_t q) {
    const Vector query = opts.condition == Condition::Original ? originals[q] : encode(queries[q]);
    const auto sims = similarities(query, originals);
    std::vector<char> mask = skip;
    mask[q] = 1;  // the query's own caption (or its unscrambled original)
    std::size_t found = 0;
    for (std::size_t j : top_k(sims, opts.k, mask))
      if (group[j] == group[q]) ++found;
    recall[q] = static_cast<double>(found) / relevant_total;
  });

  EvalReport r;
  r.metric = "paraphrase_recall@" + std::to_string(opts.k);
  r.condition = opts.condition;
  r.n_queries = kept.size();
  r.n_candidates = kept.size() - 1;
  r.seed = opts.seed;
  r.n_skipped = dropped;
  // Summed in query order.
  r.value = std::accumulate(recall.begin(), recall.end(), 0.0) / static_cast<double>(kept.size());
  return r;
}

}  // namespace imaginet
