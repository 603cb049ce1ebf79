#include "imaginet/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "imaginet/checkpoint.hpp"
#include "imaginet/errors.hpp"
#include "imaginet/rng.hpp"

namespace imaginet {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  const auto flush = [&] {
    if (current.empty()) return;
    if (current.size() > 1 && current.back() == '.') {
      current.pop_back();
      out.push_back(std::move(current));
      out.emplace_back(".");
    } else {
      out.push_back(std::move(current));
    }
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  words_ = {std::string(kUnk), std::string(kEnd)};
  index_ = {{words_[0], 0}, {words_[1], 1}};
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words, std::size_t min_count) {
  if (words.size() < 2 || words[0] != kUnk || words[1] != kEnd) {
    throw FormatError("vocabulary must start with the UNK and END sentinels");
  }
  Vocabulary v{};
  v.words_.clear();
  v.index_.clear();
  v.min_count_ = min_count;
  for (std::string& w : words) {
    const Token idx = v.words_.size();
    if (!v.index_.emplace(w, idx).second) throw FormatError("duplicate vocabulary word: " + w);
    v.words_.push_back(std::move(w));
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> corpus,
                             std::size_t min_count) {
  if (min_count < 1) throw ConfigError("build_vocab: min_count must be at least 1");
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& sentence : corpus)
    for (const std::string& w : sentence) {
      ++counts[w];
      ++total;
    }
  if (total == 0) throw DataError("build_vocab: empty corpus");

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, c] : counts)
    if (c >= min_count && w != kUnk && w != kEnd) kept.emplace_back(w, c);
  // std::map iteration is alphabetical, so a stable sort by count keeps the
  // alphabetical tie-break.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> words{std::string(kUnk), std::string(kEnd)};
  for (auto& [w, c] : kept) words.push_back(w);
  return from_words(std::move(words), min_count);
}

std::optional<Token> Vocabulary::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Token Vocabulary::index_or_unk(std::string_view word) const {
  return find(word).value_or(unk_index());
}

const std::string& Vocabulary::word(Token index) const {
  if (index >= words_.size()) {
    throw VocabularyError("token " + std::to_string(index) + " outside vocabulary of " +
                          std::to_string(words_.size()));
  }
  return words_[index];
}

std::vector<Token> Vocabulary::encode(std::span<const std::string> words) const {
  std::vector<Token> out;
  out.reserve(words.size() + 1);
  for (const std::string& w : words) out.push_back(index_or_unk(w));
  out.push_back(end_index());
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const Token> tokens) const {
  std::vector<std::string> out;
  for (Token t : tokens)
    if (t != end_index()) out.push_back(word(t));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (const std::string& w : words_) os << w << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(is, line)) words.push_back(line);
  return from_words(std::move(words));
}

std::vector<Token> scramble(std::span<const Token> tokens, Rng& rng,
                            const ScrambleOptions& opts) {
  std::vector<Token> out(tokens.begin(), tokens.end());
  if (out.size() <= 2) return out;
  std::size_t movable = out.size() - 1;  // END stays terminal
  if (opts.hold_before_end && out[movable - 1] == *opts.hold_before_end) --movable;
  rng.shuffle(std::span<Token>(out.data(), movable));
  return out;
}

void CaptionRecord::validate(Token end_token, std::size_t image_dim) const {
  if (tokens.empty() || tokens.back() != end_token) {
    throw DataError("caption for " + image_id + " is not END-terminated");
  }
  if (target.dim() != image_dim || !all_finite(target)) {
    throw DataError("caption for " + image_id + " has an invalid target vector");
  }
}

void FeatureStore::add(std::string id, Vector features) {
  if (size() == 0 && dim_ == 0) dim_ = features.dim();
  if (features.dim() != dim_) {
    throw FormatError("feature vector for " + id + " has dimension " +
                      std::to_string(features.dim()) + ", expected " + std::to_string(dim_));
  }
  if (!index_.emplace(id, ids_.size()).second) throw FormatError("duplicate image id " + id);
  ids_.push_back(std::move(id));
  vectors_.push_back(std::move(features));
}

const Vector* FeatureStore::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

std::vector<RawCaption> read_captions(std::istream& is) {
  std::vector<RawCaption> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("captions: invalid JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object() || obj.size() != 2 || !obj.contains("id") || !obj.contains("caption") ||
        !obj["id"].is_string() || !obj["caption"].is_string()) {
      throw ParseError("captions: expected exactly the string fields \"id\" and \"caption\"",
                       line_no);
    }
    out.push_back({obj["id"].get<std::string>(), obj["caption"].get<std::string>()});
  }
  return out;
}

std::vector<RawCaption> load_captions(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_captions(is);
}

void write_captions(std::ostream& os, std::span<const RawCaption> captions) {
  for (const RawCaption& c : captions) {
    nlohmann::ordered_json obj;
    obj["id"] = c.image_id;
    obj["caption"] = c.caption;
    os << obj.dump() << '\n';
  }
}

void save_captions(const std::filesystem::path& path, std::span<const RawCaption> captions) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_captions(os, captions);
  if (!os) throw IoError("failed writing " + path.string());
}

FeatureStore read_features(std::istream& is) {
  binio::expect_magic(is, "IMGF");
  const std::uint32_t n = binio::read_u32(is);
  const std::uint32_t k = binio::read_u32(is);
  FeatureStore store(k);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t len = binio::read_u32(is);
    std::string id(len, '\0');
    is.read(id.data(), len);
    if (!is) throw FormatError("features: truncated id in record " + std::to_string(i));
    Vector v(k);
    for (double& x : v) x = static_cast<double>(binio::read_f32(is));
    if (!all_finite(v)) throw FormatError("features: non-finite value for " + id);
    store.add(std::move(id), std::move(v));
  }
  return store;
}

FeatureStore load_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_features(is);
}

void write_features(std::ostream& os, const FeatureStore& store) {
  os.write("IMGF", 4);
  binio::write_u32(os, static_cast<std::uint32_t>(store.size()));
  binio::write_u32(os, static_cast<std::uint32_t>(store.dim()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& id = store.ids()[i];
    binio::write_u32(os, static_cast<std::uint32_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (double x : store.at(i)) binio::write_f32(os, static_cast<float>(x));
  }
}

void save_features(const std::filesystem::path& path, const FeatureStore& store) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_features(os, store);
  if (!os) throw IoError("failed writing " + path.string());
}

JoinResult join_captions(std::span<const RawCaption> captions, const FeatureStore& features,
                         const Vocabulary& vocab) {
  JoinResult out;
  for (const RawCaption& c : captions) {
    const Vector* target = features.find(c.image_id);
    if (target == nullptr) {
      ++out.dropped;
      continue;
    }
    const auto words = tokenize(c.caption);
    CaptionRecord rec{c.image_id, vocab.encode(words), *target};
    rec.validate(vocab.end_index(), features.dim());
    out.records.push_back(std::move(rec));
  }
  return out;
}

std::vector<SimilarityPair> read_similarity_benchmark(std::istream& is) {
  std::vector<SimilarityPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string w1, w2, score;
    if (!std::getline(fields, w1, '\t') || !std::getline(fields, w2, '\t') ||
        !std::getline(fields, score, '\t')) {
      throw ParseError("similarity benchmark: expected three tab-separated columns", line_no);
    }
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(score, &used);
      if (used != score.size()) throw std::invalid_argument(score);
    } catch (const std::exception&) {
      throw ParseError("similarity benchmark: bad score '" + score + "'", line_no);
    }
    out.push_back({w1, w2, value});
  }
  return out;
}

std::vector<SimilarityPair> load_similarity_benchmark(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_similarity_benchmark(is);
}

void save_similarity_benchmark(const std::filesystem::path& path,
                               std::span<const SimilarityPair> pairs) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "# word1\tword2\tscore\n";
  os.precision(17);
  for (const SimilarityPair& p : pairs) os << p.word1 << '\t' << p.word2 << '\t' << p.score << '\n';
}

std::vector<std::pair<std::string, std::string>> load_image_labels(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("labels: expected id<TAB>label", line_no);
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

void save_image_labels(const std::filesystem::path& path,
                       std::span<const std::pair<std::string, std::string>> labels) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& [id, label] : labels) os << id << '\t' << label << '\n';
}

}  // namespace imaginet
