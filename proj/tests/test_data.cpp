#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "imaginet/data.hpp"
#include "imaginet/errors.hpp"
#include "imaginet/rng.hpp"

using namespace imaginet;
namespace fs = std::filesystem;

namespace {

using Words = std::vector<std::string>;

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "imaginet_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& s, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(s, bits);
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("A dog runs.") == Words{"a", "dog", "runs", "."});
  CHECK(tokenize("  Two\tCATS\n sit ") == Words{"two", "cats", "sit"});
  CHECK(tokenize("") == Words{});
  CHECK(tokenize(". x.") == Words{".", "x", "."});
  for (const char* s : {"A Red ball. On grass.", "x  y", "Hello."}) {
    const Words once = tokenize(s);
    std::string joined;
    for (const auto& w : once) joined += w + " ";
    CHECK(tokenize(joined) == once);
  }
}

TEST_CASE("vocabulary threshold and sentinels") {
  const std::vector<Words> corpus{{"b", "a", "c"}, {"a", "b"}, {"a", "d"}};
  const Vocabulary v = Vocabulary::build(corpus, 2);
  CHECK(v.words() == Words{"<unk>", "<end>", "a", "b"});
  CHECK(v.find("c") == std::nullopt);
  CHECK(v.index_or_unk("c") == v.unk_index());
  CHECK(*v.find("b") == 3);

  const Vocabulary all = Vocabulary::build(corpus, 1);
  CHECK(all.words() == Words{"<unk>", "<end>", "a", "b", "c", "d"});
  CHECK(Vocabulary::build(corpus, 4).size() == 2);

  CHECK_THROWS_AS(Vocabulary::build(std::vector<Words>{}, 1), DataError);
  CHECK_THROWS_AS(Vocabulary::build(std::vector<Words>{{}}, 1), DataError);
  CHECK_THROWS_AS(Vocabulary::build(corpus, 0), ConfigError);
  CHECK_THROWS_AS(v.word(4), VocabularyError);
}

TEST_CASE("encode appends END and decode inverts it") {
  const Vocabulary v = Vocabulary::build(std::vector<Words>{{"x", "y", "y"}}, 1);
  const Words s{"y", "x", "q"};
  const std::vector<Token> enc = v.encode(s);
  CHECK(enc == std::vector<Token>{2, 3, 0, 1});
  CHECK(v.decode(enc) == Words{"y", "x", "<unk>"});
  CHECK(v.encode(Words{}) == std::vector<Token>{1});
}

TEST_CASE("vocabulary file round trip") {
  const Vocabulary v = Vocabulary::build(std::vector<Words>{{"p", "q", "p"}}, 1);
  const fs::path path = temp_file("vocab.txt");
  v.save(path);
  CHECK(Vocabulary::load(path) == v);
  CHECK_THROWS_AS(Vocabulary::from_words({"p", "q"}), FormatError);
  CHECK_THROWS_AS(Vocabulary::from_words({"<unk>", "<end>", "p", "p"}), FormatError);
}

TEST_CASE("scramble keeps the multiset and the terminal END") {
  Rng rng(3);
  const std::vector<Token> s{5, 6, 7, 8, 9, 4, 1};
  bool moved = false;
  for (int i = 0; i < 200; ++i) {
    const auto out = scramble(s, rng);
    REQUIRE(out.size() == s.size());
    CHECK(out.back() == 1);
    CHECK(std::is_permutation(out.begin(), out.end(), s.begin()));
    moved |= out != s;
  }
  CHECK(moved);

  Rng a(8), b(8);
  CHECK(scramble(s, a) == scramble(s, b));

  for (int i = 0; i < 50; ++i) {
    const auto held = scramble(s, rng, ScrambleOptions{Token{4}});
    CHECK(held[5] == 4);
    CHECK(held[6] == 1);
  }
  CHECK(scramble(std::vector<Token>{3, 1}, rng) == std::vector<Token>{3, 1});
}

TEST_CASE("captions JSONL") {
  std::istringstream good(R"({"id": "a", "caption": "A dog."}

{"id": "b", "caption": "two cats"}
)");
  const auto caps = read_captions(good);
  REQUIRE(caps.size() == 2);
  CHECK(caps[1].image_id == "b");
  CHECK(caps[0].caption == "A dog.");

  std::istringstream empty("");
  CHECK(read_captions(empty).empty());

  std::istringstream bad(R"({"id": "a", "caption": "x"}
{"id": "b", "caption": "y"}
{"id": "c", caption: "z"}
)");
  try {
    read_captions(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream missing(R"({"id": "a"})");
  CHECK_THROWS_AS(read_captions(missing), ParseError);
  std::istringstream numeric(R"({"id": 3, "caption": "x"})");
  CHECK_THROWS_AS(read_captions(numeric), ParseError);

  std::ostringstream os;
  write_captions(os, caps);
  std::istringstream back(os.str());
  const auto again = read_captions(back);
  REQUIRE(again.size() == 2);
  CHECK(again[0].caption == caps[0].caption);
}

TEST_CASE("features file layout") {
  std::string bytes = "IMGF";
  put_u32(bytes, 2);
  put_u32(bytes, 3);
  put_u32(bytes, 2);
  bytes += "i1";
  for (float f : {0.5f, -1.25f, 3.0f}) put_f32(bytes, f);
  put_u32(bytes, 3);
  bytes += "img";
  for (float f : {0.1f, 0.0f, 2.5f}) put_f32(bytes, f);

  std::istringstream is(bytes);
  const FeatureStore store = read_features(is);
  CHECK(store.size() == 2);
  CHECK(store.dim() == 3);
  CHECK(store.ids() == Words{"i1", "img"});
  CHECK(*store.find("i1") == Vector{0.5, -1.25, 3.0});
  CHECK((*store.find("img"))[0] == static_cast<double>(0.1f));
  CHECK(store.find("nope") == nullptr);

  std::ostringstream os;
  write_features(os, store);
  CHECK(os.str() == bytes);

  std::istringstream truncated(bytes.substr(0, bytes.size() - 2));
  CHECK_THROWS_AS(read_features(truncated), FormatError);
  std::string wrong = bytes;
  wrong[0] = 'X';
  std::istringstream bad_magic(wrong);
  CHECK_THROWS_AS(read_features(bad_magic), FormatError);

  FeatureStore dup(1);
  dup.add("a", Vector{1});
  CHECK_THROWS_AS(dup.add("a", Vector{2}), FormatError);
  CHECK_THROWS_AS(dup.add("b", Vector{1, 2}), FormatError);
}

TEST_CASE("join drops captions without features") {
  FeatureStore store(2);
  store.add("a", Vector{1, 2});
  store.add("b", Vector{3, 4});
  const std::vector<RawCaption> caps{{"a", "red dog"}, {"zz", "red cat"}, {"b", "cat"}};
  const Vocabulary v = Vocabulary::build(std::vector<Words>{{"red", "dog", "cat"}}, 1);
  const JoinResult j = join_captions(caps, store, v);
  CHECK(j.dropped == 1);
  REQUIRE(j.records.size() == 2);
  CHECK(j.records[1].image_id == "b");
  CHECK(j.records[1].target == Vector{3, 4});
  CHECK(j.records[0].tokens.back() == v.end_index());
  CHECK(j.records[0].tokens.size() == 3);
}

TEST_CASE("record validation") {
  CaptionRecord r{"x", {2, 1}, Vector{1, 2}};
  CHECK_NOTHROW(r.validate(1, 2));
  CHECK_THROWS_AS(r.validate(1, 3), DataError);
  r.tokens = {2, 3};
  CHECK_THROWS_AS(r.validate(1, 2), DataError);
  r.tokens = {};
  CHECK_THROWS_AS(r.validate(1, 2), DataError);
  r.tokens = {1};
  r.target[0] = NAN;
  CHECK_THROWS_AS(r.validate(1, 2), DataError);
}

TEST_CASE("similarity benchmark") {
  std::istringstream is("# human ratings\nbird\tplane\t3.5\n\ncat\tdog\t7\n");
  const auto pairs = read_similarity_benchmark(is);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].word1 == "bird");
  CHECK(pairs[1].score == 7.0);

  std::istringstream bad("a\tb\tc\n");
  CHECK_THROWS_AS(read_similarity_benchmark(bad), ParseError);
  std::istringstream short_line("a\tb\n");
  CHECK_THROWS_AS(read_similarity_benchmark(short_line), ParseError);

  const fs::path path = temp_file("sim.tsv");
  save_similarity_benchmark(path, pairs);
  const auto again = load_similarity_benchmark(path);
  REQUIRE(again.size() == 2);
  CHECK(again[0].score == 3.5);
}

TEST_CASE("image labels") {
  const fs::path path = temp_file("labels.tsv");
  const std::vector<std::pair<std::string, std::string>> labels{{"i1", "dog"}, {"i2", "cat"}};
  save_image_labels(path, labels);
  CHECK(load_image_labels(path) == labels);
  std::ofstream(path) << "nolabel\n";
  CHECK_THROWS_AS(load_image_labels(path), ParseError);
  CHECK_THROWS_AS(load_image_labels(temp_file("does_not_exist.tsv")), IoError);
}
