#include <functional>
#include <set>
#include <sstream>

#include "doctest.h"
#include "synthetic.hpp"
#include "sameside/error.hpp"
#include "sameside/tokenizer.hpp"

using namespace sameside;
using testing::make_record;

namespace {

const char* kHeader = "id,topic,argument1,argument1_id,argument2,argument2_id,is_same_stance\n";

Corpus parse_csv(const std::string& text) {
  std::istringstream in(text);
  return parse_corpus(in, CorpusFormat::kCsv, "test");
}

ErrorCode error_code_of(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

Corpus random_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ArgumentPairRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    recs.push_back(make_record("r" + std::to_string(i), testing::filler(rng, 1 + rng.uniform_index(30)),
                               testing::filler(rng, 1 + rng.uniform_index(30)), rng.uniform_index(2) == 1,
                               rng.uniform_index(2) ? "abortion" : "gay marriage"));
  }
  return Corpus(std::move(recs), "random");
}

}  // namespace

TEST_CASE("parse csv") {
  const Corpus c = parse_csv(std::string(kHeader) +
                             "p1,abortion,first arg,a1,second arg,a2,True\n"
                             "p2,abortion,\"multi\nline, \"\"quoted\"\"\",a3,x,a4,False\n");
  REQUIRE(c.size() == 2);
  CHECK(c[0].is_same_stance);
  CHECK_FALSE(c[1].is_same_stance);
  CHECK(c[1].argument1 == "multi\nline, \"quoted\"");
  CHECK(c.topics() == std::set<std::string>{"abortion"});

  SUBCASE("labels are case-insensitive") {
    const Corpus d = parse_csv(std::string(kHeader) + "a,t,x,1,y,2,true\nb,t,x,1,y,2,FALSE\n");
    CHECK(d[0].is_same_stance);
    CHECK_FALSE(d[1].is_same_stance);
  }
  SUBCASE("column order follows the header") {
    const Corpus d = parse_csv("is_same_stance,argument2_id,argument2,argument1_id,argument1,topic,id\nTrue,b2,B,b1,A,t,q\n");
    ArgumentPairRecord want = make_record("q", "A", "B", true, "t");
    want.argument1_id = "b1";
    want.argument2_id = "b2";
    CHECK(d[0] == want);
  }
}

TEST_CASE("parse errors") {
  std::string msg;
  CHECK(error_code_of([] { parse_csv("id,argument1,argument1_id,argument2,argument2_id,is_same_stance\n"); }, &msg) ==
        ErrorCode::kSchema);
  CHECK(msg.find("topic") != std::string::npos);

  CHECK(error_code_of([] { parse_csv(std::string(kHeader) + "a,t,x,1,y,2,True\nb,t,x,1,y,2,True\na,t,x,1,y,2,False\n"); },
                      &msg) == ErrorCode::kDuplicateId);
  CHECK(msg.find('1') != std::string::npos);
  CHECK(msg.find('3') != std::string::npos);

  CHECK(error_code_of([] { parse_csv(std::string(kHeader) + "a,t,x,1,y,2,True\nb,t,x,1,y,2,maybe\n"); }, &msg) ==
        ErrorCode::kLabel);
  CHECK(msg.find('2') != std::string::npos);

  CHECK(error_code_of([] { parse_csv(std::string(kHeader) + "a,t,  ,1,y,2,True\n"); }) == ErrorCode::kSchema);
  CHECK(error_code_of([] { parse_csv(std::string(kHeader) + "a,t,\"unterminated,1,y,2,True\n"); }) ==
        ErrorCode::kFormat);
  CHECK(error_code_of([] { load_corpus("/nonexistent/file.csv"); }) == ErrorCode::kIo);
}

TEST_CASE("jsonl") {
  std::istringstream in(
      R"({"id":"x","topic":"t","argument1":"A é","argument1_id":"1","argument2":"B","argument2_id":"2","is_same_stance":true})"
      "\n\n"
      R"({"id":"y","topic":"t","argument1":"C","argument1_id":"1","argument2":"D","argument2_id":"2","is_same_stance":"False"})"
      "\n");
  const Corpus c = parse_corpus(in, CorpusFormat::kJsonl);
  REQUIRE(c.size() == 2);
  CHECK(c[0].argument1 == "A \xc3\xa9");
  CHECK_FALSE(c[1].is_same_stance);

  std::istringstream bad(R"({"id":"x","topic":"t"})" "\n");
  CHECK_THROWS_AS(parse_corpus(bad, CorpusFormat::kJsonl), Error);
  CHECK(format_from_path("a/b.jsonl") == CorpusFormat::kJsonl);
  CHECK(format_from_path("a/b.csv") == CorpusFormat::kCsv);
}

TEST_CASE("round trip preserves all fields") {
  std::vector<ArgumentPairRecord> recs = {
      make_record("1", "plain", "text", true),
      make_record("2", "comma, \"quote\"\nnewline", "tab\there", false, "gay marriage"),
      make_record("3", "\xe2\x80\x9cunicode\xe2\x80\x9d", "  leading space", true),
  };
  recs[1].argument1_id = "shared";
  recs[2].argument1_id = "shared";
  const Corpus c(recs, "rt");
  for (CorpusFormat f : {CorpusFormat::kCsv, CorpusFormat::kJsonl}) {
    std::stringstream buf;
    write_corpus(buf, c, f);
    const Corpus back = parse_corpus(buf, f);
    CHECK(back.records() == c.records());
  }
}

TEST_CASE("class statistics") {
  CHECK(class_statistics(Corpus{}).per_topic.empty());
  const Corpus c = random_corpus(200, 4);
  const ClassStatistics s = class_statistics(c);
  std::size_t total = 0;
  for (const auto& [topic, counts] : s.per_topic) {
    CHECK(counts.total == counts.same_side + counts.different_side);
    total += counts.total;
  }
  CHECK(total == c.size());
  CHECK(s.overall().total == 200);
  const std::string md = class_statistics_markdown(s);
  CHECK(md.find("abortion") != std::string::npos);
  CHECK(class_statistics_json(s).find("\"gay marriage\"") != std::string::npos);

  ClassStatistics table;
  table.per_topic["abortion"] = {20834, 20006, 40840};
  table.per_topic["gay marriage"] = {13277, 9786, 23063};
  CHECK(table.overall() == TopicCounts{34111, 29792, 63903});
  const std::string table_md = class_statistics_markdown(table);
  CHECK(table_md.find("| Total | 40,840 | 23,063 | 63,903 |") != std::string::npos);
  CHECK(table_md.find("| Same Side | 20,834 | 13,277 | 34,111 |") != std::string::npos);
}

TEST_CASE("split") {
  CHECK(train_size_for(63903, 0.9) == 57512);
  CHECK(train_size_for(61048, 0.9) == 54943);
  CHECK(train_size_for(10, 0.9) == 9);
  CHECK(train_size_for(10, 0.5) == 5);
  CHECK(train_size_for(3, 0.5) == 1);

  const Corpus c = random_corpus(10, 1);
  const DataSplit a = split(c, 0.9, 42), b = split(c, 0.9, 42);
  CHECK(a.train.records() == b.train.records());
  CHECK(a.test.records() == b.test.records());
  CHECK_THROWS_AS(split(c, 0.0, 1), Error);
  CHECK_THROWS_AS(split(c, 1.0, 1), Error);

  SUBCASE("partition property") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      Rng rng(seed);
      const Corpus rc = random_corpus(1 + rng.uniform_index(60), seed);
      const double fraction = 0.05 + 0.9 * rng.uniform01();
      const DataSplit s = split(rc, fraction, seed);
      CHECK(s.train.size() == train_size_for(rc.size(), fraction));
      CHECK(s.train.size() + s.test.size() == rc.size());
      std::set<std::string> ids;
      for (const auto& r : s.train.records()) ids.insert(r.id);
      for (const auto& r : s.test.records()) CHECK(ids.insert(r.id).second);
      for (const auto& r : rc.records()) CHECK(ids.count(r.id) == 1);
    }
  }
}

TEST_CASE("filter_untruncated") {
  const Corpus c = random_corpus(80, 9);
  const Vocabulary vocab = build_vocab(c, 500, 1);
  CHECK(filter_untruncated(c, vocab, 512).records() == c.records());

  std::size_t previous = 0;
  std::set<std::string> kept_before;
  for (std::size_t len : {16u, 24u, 32u, 48u, 64u, 80u}) {
    const Corpus f = filter_untruncated(c, vocab, len);
    CHECK(f.size() >= previous);
    std::set<std::string> kept;
    for (const auto& r : f.records()) {
      kept.insert(r.id);
      CHECK(encoded_length(r, vocab) <= len);
    }
    for (const auto& id : kept_before) CHECK(kept.count(id) == 1);
    kept_before = kept;
    previous = f.size();
  }
}

TEST_CASE("length histogram") {
  const auto h = histogram_from_lengths({100, 600}, 50, {512});
  CHECK(h.fraction_leq.at(512) == 0.5);
  CHECK(h.total_pairs == 2);

  const auto one = histogram_from_lengths({10}, 16, {512});
  CHECK(one.buckets.at(0) == 1);
  CHECK(one.fraction_leq.at(512) == 1.0);

  Rng rng(2);
  std::vector<std::size_t> lengths;
  for (int i = 0; i < 500; ++i) lengths.push_back(8 + rng.uniform_index(900));
  const auto big = histogram_from_lengths(lengths, 32, {64, 512, 2000});
  std::size_t sum = 0;
  for (const auto& [b, n] : big.buckets) sum += n;
  CHECK(sum == 500);
  std::size_t under = 0;
  for (std::size_t l : lengths) under += l <= 512;
  CHECK(big.fraction_leq.at(512) == doctest::Approx(under / 500.0));
  CHECK(big.fraction_leq.at(2000) == 1.0);

  const auto back = LengthHistogram::from_csv(big.to_csv());
  CHECK(back.bucket_width == 32);
  CHECK(back.buckets == big.buckets);
  CHECK(back.total_pairs == 500);

  CHECK_THROWS_AS(histogram_from_lengths({}, 16, {512}), Error);
  CHECK_THROWS_AS(histogram_from_lengths({5}, 0, {512}), Error);
  const Corpus c = random_corpus(5, 1);
  const Vocabulary vocab = build_vocab(c, 500, 1);
  CHECK_THROWS_AS(length_histogram(Corpus{}, vocab, 16, {512}), Error);
  CHECK(length_histogram(c, vocab, 16, {512}).total_pairs == 5);
}
