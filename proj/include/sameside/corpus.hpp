#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sameside {

class Vocabulary;

// One labeled pair of arguments in the shared-task schema.
struct ArgumentPairRecord {
  std::string id;
  std::string topic;
  std::string argument1;
  std::string argument1_id;
  std::string argument2;
  std::string argument2_id;
  bool is_same_stance = false;

  bool operator==(const ArgumentPairRecord&) const = default;
};

enum class CorpusFormat { kCsv, kJsonl };

// Picks the format from a file extension (".jsonl"/".json" vs anything else).
CorpusFormat format_from_path(std::string_view path);

// Ordered, immutable collection of records. Pair ids are unique; argument ids
// may repeat across pairs.
class Corpus {
 public:
  Corpus() = default;
  // Validates the record invariants (unique non-empty ids, non-blank
  // arguments) and throws Error on violation.
  Corpus(std::vector<ArgumentPairRecord> records, std::string source_name);

  const std::vector<ArgumentPairRecord>& records() const { return records_; }
  const std::string& source_name() const { return source_name_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const ArgumentPairRecord& operator[](std::size_t i) const { return records_[i]; }

  std::set<std::string> topics() const;

 private:
  std::vector<ArgumentPairRecord> records_;
  std::string source_name_;
};

// The seven field names of the schema, in canonical column order.
const std::vector<std::string>& corpus_field_names();

Corpus parse_corpus(std::istream& in, CorpusFormat format, std::string source_name = {});
Corpus load_corpus(const std::string& path);
Corpus load_corpus(const std::string& path, CorpusFormat format);

void write_corpus(std::ostream& out, const Corpus& corpus, CorpusFormat format);
void save_corpus(const std::string& path, const Corpus& corpus, CorpusFormat format);

struct TopicCounts {
  std::size_t same_side = 0;
  std::size_t different_side = 0;
  std::size_t total = 0;

  bool operator==(const TopicCounts&) const = default;
};

struct ClassStatistics {
  std::map<std::string, TopicCounts> per_topic;

  TopicCounts overall() const;
};

ClassStatistics class_statistics(const Corpus& corpus);
std::string class_statistics_json(const ClassStatistics& stats);
// Table with one column per topic plus an overall column.
std::string class_statistics_markdown(const ClassStatistics& stats);

struct DataSplit {
  Corpus train;
  Corpus test;
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

// Uniform seeded shuffle, then the first floor(fraction * N) records go to
// train. Records keep their shuffled order in both halves.
DataSplit split(const Corpus& corpus, double fraction, std::uint64_t seed);
std::size_t train_size_for(std::size_t n, double fraction);

// Keeps the records whose full encoded length ([CLS] A [SEP] B [SEP]) fits
// in max_seq_len. Order is preserved.
Corpus filter_untruncated(const Corpus& corpus, const Vocabulary& vocab, std::size_t max_seq_len);

struct LengthHistogram {
  std::size_t bucket_width = 1;
  std::map<std::size_t, std::size_t> buckets;  // bucket index -> pair count
  std::size_t total_pairs = 0;
  std::map<std::size_t, double> fraction_leq;  // threshold -> fraction

  std::string to_json() const;
  // Rows of bucket_start,count in ascending order.
  std::string to_csv() const;
  // Inverse of to_csv; the bucket width is recovered as the gcd of the
  // bucket starts. fraction_leq is left empty.
  static LengthHistogram from_csv(const std::string& text);
};

LengthHistogram length_histogram(const Corpus& corpus, const Vocabulary& vocab,
                                 std::size_t bucket_width,
                                 const std::vector<std::size_t>& thresholds);
LengthHistogram histogram_from_lengths(const std::vector<std::size_t>& lengths,
                                       std::size_t bucket_width,
                                       const std::vector<std::size_t>& thresholds);

}  // namespace sameside
