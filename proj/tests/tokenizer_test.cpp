#include <set>
#include <sstream>

#include "doctest.h"
#include "synthetic.hpp"
#include "truncation_oracle.hpp"
#include "sameside/error.hpp"
#include "sameside/tokenizer.hpp"

using namespace sameside;
using testing::make_record;

namespace {

using Tokens = std::vector<std::string>;

std::vector<std::string> pieces(const std::vector<TokenId>& ids, const Vocabulary& v) {
  std::vector<std::string> out;
  for (TokenId id : ids) out.push_back(v.token(id));
  return out;
}

Vocabulary char_vocab(std::vector<std::string> extra) {
  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (char c = 'a'; c <= 'z'; ++c) tokens.emplace_back(1, c);
  for (char c = 'a'; c <= 'z'; ++c) tokens.push_back(std::string("##") + c);
  for (auto& e : extra) tokens.push_back(std::move(e));
  return Vocabulary(std::move(tokens));
}

void check_invariants(const EncodedPair& e, std::size_t max_len) {
  REQUIRE(e.token_ids.size() == max_len);
  REQUIRE(e.segment_ids.size() == max_len);
  REQUIRE(e.attention_mask.size() == max_len);
  CHECK(e.token_ids[0] == kClsId);
  const std::size_t n = e.unpadded_length();
  std::size_t seps = 0;
  std::size_t first_sep = 0;
  for (std::size_t i = 0; i < max_len; ++i) {
    CHECK(e.attention_mask[i] == (i < n ? 1 : 0));
    if (i >= n) {
      CHECK(e.token_ids[i] == kPadId);
      CHECK(e.segment_ids[i] == 1);
      continue;
    }
    if (e.token_ids[i] == kSepId && ++seps == 1) first_sep = i;
    CHECK(e.segment_ids[i] == (seps == 0 || (seps == 1 && i == first_sep) ? 0 : 1));
  }
  CHECK(seps == 2);
  CHECK(e.token_ids[n - 1] == kSepId);
}

}  // namespace

TEST_CASE("basic_tokenize") {
  CHECK(basic_tokenize("Gay Marriage") == Tokens{"gay", "marriage"});
  CHECK(basic_tokenize("It's legal.") == Tokens{"it", "'", "s", "legal", "."});
  CHECK(basic_tokenize("").empty());
  CHECK(basic_tokenize(" \t\n ").empty());
  CHECK(basic_tokenize("a+b=c") == Tokens{"a", "+", "b", "=", "c"});
  CHECK(basic_tokenize("\xc3\x89T\xc3\x89 \xe2\x80\x9cok\xe2\x80\x9d") == Tokens{"\xc3\xa9t\xc3\xa9", "\xe2\x80\x9c", "ok", "\xe2\x80\x9d"});
  CHECK(basic_tokenize("x\xc2\xa0y") == Tokens{"x", "y"});
  CHECK(is_punctuation(U'¿'));
  CHECK(is_punctuation(U'$'));
  CHECK_FALSE(is_punctuation(U'a'));
  CHECK(to_lower(U'Α') == U'α');
}

TEST_CASE("build_vocab") {
  const Corpus c({make_record("1", "abortion abortion", "abortion is", true),
                  make_record("2", "zebra", "quux", false)},
                 "v");
  const Vocabulary v = build_vocab(c, 1000, 2);
  CHECK(v.contains("abortion"));
  CHECK_FALSE(v.contains("zebra"));
  CHECK(v.find("[PAD]") == kPadId);
  CHECK(v.find("[UNK]") == kUnkId);
  CHECK(v.find("[CLS]") == kClsId);
  CHECK(v.find("[SEP]") == kSepId);
  CHECK(v.contains("z"));
  CHECK(v.contains("##z"));
  CHECK(v == build_vocab(c, 1000, 2));

  SUBCASE("high min_freq keeps only characters") {
    const Vocabulary only = build_vocab(c, 1000, 10);
    std::set<char> chars;
    for (const auto& r : c.records())
      for (const auto* s : {&r.argument1, &r.argument2})
        for (char ch : *s)
          if (ch != ' ') chars.insert(ch);
    CHECK(only.size() == 4 + 2 * chars.size());
    for (std::size_t i = 4; i < only.size(); ++i) {
      const std::string& t = only.tokens()[i];
      CHECK((t.size() == 1 || (t.size() == 3 && t.starts_with("##"))));
    }
  }
  SUBCASE("frequency order with lexicographic ties") {
    const Corpus d({make_record("1", "bb bb aa aa cc", "cc dd", true)}, "d");
    const Vocabulary w = build_vocab(d, 1000, 1);
    CHECK(w.find("aa") < w.find("bb"));
    CHECK(w.find("bb") < w.find("cc"));
    CHECK(w.find("cc") < w.find("dd"));
  }
  SUBCASE("max_size") {
    CHECK_THROWS_AS(build_vocab(c, 8, 1), Error);
    const Vocabulary capped = build_vocab(c, build_vocab(c, 1000, 10).size() + 1, 1);
    CHECK(capped.contains("abortion"));
    CHECK_FALSE(capped.contains("is"));
  }
  SUBCASE("save and load") {
    std::stringstream buf;
    v.save(buf);
    CHECK(Vocabulary::load(buf) == v);
    std::stringstream bad("[UNK]\n[PAD]\n");
    CHECK_THROWS_AS(Vocabulary::load(bad), Error);
  }
}

TEST_CASE("wordpiece") {
  const Vocabulary v = char_vocab({"marri", "##age", "mar"});
  CHECK(pieces(wordpiece("marriage", v), v) == Tokens{"marri", "##age"});
  CHECK(pieces(wordpiece("a", v), v) == Tokens{"a"});
  CHECK(wordpiece("\xe2\x98\x83x", v) == std::vector<TokenId>{kUnkId});
  CHECK(pieces(wordpiece("marx", v), v) == Tokens{"mar", "##x"});

  SUBCASE("round trip over the alphabet") {
    const Corpus c = testing::separable_corpus(40, 3);
    const Vocabulary cv = build_vocab(c, 60, 1);
    Rng rng(8);
    for (int i = 0; i < 300; ++i) {
      std::string word;
      const std::size_t n = 1 + rng.uniform_index(12);
      for (std::size_t k = 0; k < n; ++k) {
        const std::string& f = testing::filler_words()[rng.uniform_index(testing::filler_words().size())];
        word.push_back(f[rng.uniform_index(f.size())]);
      }
      std::string joined;
      const auto ids = wordpiece(word, cv);
      for (std::size_t k = 0; k < ids.size(); ++k) {
        std::string piece = cv.token(ids[k]);
        if (k > 0) {
          REQUIRE(piece.starts_with("##"));
          piece = piece.substr(2);
        }
        joined += piece;
      }
      CHECK(joined == word);
    }
  }
}

TEST_CASE("truncate_pair") {
  CHECK(truncated_lengths(10, 10, 32) == std::pair<std::size_t, std::size_t>{10, 10});
  CHECK(truncated_lengths(300, 400, 509) == std::pair<std::size_t, std::size_t>{255, 254});
  CHECK(truncated_lengths(600, 1, 509) == std::pair<std::size_t, std::size_t>{508, 1});
  CHECK_THROWS_AS(truncated_lengths(3, 3, 1), Error);

  Rng rng(10);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t a = rng.uniform_index(800), b = rng.uniform_index(800), budget = 2 + rng.uniform_index(600);
    const auto got = truncated_lengths(a, b, budget);
    REQUIRE(got == testing::truncate_loop(a, b, budget));
    CHECK(got.first + got.second == std::min(a + b, budget));
  }

  std::vector<int> a = {1, 2, 3, 4, 5}, b = {6, 7};
  truncate_pair(a, b, 4);
  CHECK(a == std::vector<int>{1, 2});
  CHECK(b == std::vector<int>{6, 7});
}

TEST_CASE("encode_pair") {
  const Vocabulary v = char_vocab({"one", "two", "three", "four", "five"});
  const auto rec = make_record("p", "one two three four five", "five four three two one", true);
  const EncodedPair e = encode_pair(rec, v, 32);
  check_invariants(e, 32);
  CHECK(e.unpadded_length() == 13);
  CHECK(e.label);
  CHECK(e.pair_id == "p");

  const EncodedPair wide = encode_pair(rec, v, 512);
  CHECK(std::equal(e.token_ids.begin(), e.token_ids.begin() + 13, wide.token_ids.begin()));
  CHECK(encode_pair(rec, v, 32) == e);

  std::string long_a, long_b;
  for (int i = 0; i < 400; ++i) long_a += "one ";
  for (int i = 0; i < 300; ++i) long_b += "two ";
  const EncodedPair full = encode_pair(make_record("l", long_a, long_b, false), v, 512);
  check_invariants(full, 512);
  CHECK(full.unpadded_length() == 512);

  CHECK_THROWS_AS(encode_pair(rec, v, 7), Error);
  CHECK_THROWS_AS(encode_pair(rec, v, 513), Error);
  bool threw = false;
  try {
    encode_pair(make_record("empty-id", "one", "\xe3\x80\x80", true), v, 32);
  } catch (const Error& err) {
    threw = true;
    CHECK(err.code() == ErrorCode::kEncode);
    CHECK(std::string(err.what()).find("empty-id") != std::string::npos);
  }
  CHECK(threw);

  SUBCASE("property over random records") {
    const Corpus c = testing::separable_corpus(60, 5);
    const Vocabulary cv = build_vocab(c, 100, 1);
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const std::size_t len = 8 + rng.uniform_index(40);
      const auto r = make_record("x", testing::filler(rng, 1 + rng.uniform_index(30)),
                                 testing::filler(rng, 1 + rng.uniform_index(30)), true);
      const EncodedPair enc = encode_pair(r, cv, len);
      check_invariants(enc, len);
      CHECK(enc.unpadded_length() == std::min(len, encoded_length(r, cv)));
    }
  }
}

TEST_CASE("encoded cache round trip") {
  const Corpus c = testing::separable_corpus(10, 2);
  const Vocabulary v = build_vocab(c, 100, 1);
  auto pairs = encode_corpus(c, v, 16);
  std::stringstream buf;
  write_encoded_cache(buf, pairs, 16);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "SSENCODE");
  CHECK(bytes.size() == 8 + 4 + 4 + 8 + 10 * (16 * 12 + 1));
  std::stringstream in(bytes);
  auto back = read_encoded_cache(in);
  for (auto& p : pairs) p.pair_id.clear();
  CHECK(back == pairs);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_encoded_cache(truncated), Error);
}
