#include "sameside/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "sameside/error.hpp"
#include "sameside/random.hpp"
#include "sameside/tokenizer.hpp"
#include "util.hpp"

namespace sameside {
namespace {

using nlohmann::json;

// The shared-task release names the label column "is_same_side".
constexpr std::string_view kLabelAlias = "is_same_side";

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

std::string strip_trailing_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') {
    s.pop_back();
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }
  return s;
}

bool parse_label(std::string_view raw, std::size_t row) {
  std::string lowered;
  for (char c : detail::trim(raw)) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lowered == "true") return true;
  if (lowered == "false") return false;
  throw Error(ErrorCode::kLabel, "row " + std::to_string(row) + ": cannot parse label '" + std::string(raw) + "'");
}

// RFC 4180 reader: comma separated, double-quote quoting, doubled quotes as
// escapes, newlines allowed inside quoted fields.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Reads one record; false at end of input.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.get();
    if (c == EOF) return false;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (;; c = in_.get()) {
      if (quoted) {
        if (c == EOF) throw Error(ErrorCode::kFormat, "unterminated quoted field in csv line " + std::to_string(line_));
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(static_cast<char>(c));
        }
        continue;
      }
      if (c == EOF || c == '\n') {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        fields.push_back(std::move(field));
        ++line_;
        return true;
      }
      if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
        field_started = false;
        continue;
      }
      if (c == '"' && !field_started) {
        quoted = true;
        field_started = true;
        continue;
      }
      field_started = true;
      field.push_back(static_cast<char>(c));
    }
  }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
};

struct ColumnMap {
  std::vector<std::size_t> index;  // canonical field -> column position
};

ColumnMap map_header(const std::vector<std::string>& header) {
  const auto& names = corpus_field_names();
  ColumnMap map;
  for (const auto& name : names) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end() && name == "is_same_stance") it = std::find(header.begin(), header.end(), kLabelAlias);
    if (it == header.end()) throw Error(ErrorCode::kSchema, "missing column '" + name + "'");
    map.index.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  return map;
}

Corpus parse_csv(std::istream& in, std::string source_name) {
  CsvReader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw Error(ErrorCode::kSchema, "csv input is empty (header required)");
  if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
  for (auto& f : fields) f = detail::trim(f);
  const ColumnMap map = map_header(fields);
  const std::size_t width = fields.size();

  std::vector<ArgumentPairRecord> records;
  std::size_t row = 0;
  while (reader.next(fields)) {
    ++row;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != width) {
      throw Error(ErrorCode::kSchema, "row " + std::to_string(row) + ": expected " + std::to_string(width) +
                                          " fields, found " + std::to_string(fields.size()));
    }
    const auto field = [&](std::size_t k) { return strip_trailing_newline(fields[map.index[k]]); };
    ArgumentPairRecord rec;
    rec.id = field(0);
    rec.topic = field(1);
    rec.argument1 = field(2);
    rec.argument1_id = field(3);
    rec.argument2 = field(4);
    rec.argument2_id = field(5);
    rec.is_same_stance = parse_label(fields[map.index[6]], row);
    records.push_back(std::move(rec));
  }
  return Corpus(std::move(records), std::move(source_name));
}

std::string json_text(const json& obj, const std::string& name, std::size_t row) {
  auto it = obj.find(name);
  if (it == obj.end()) throw Error(ErrorCode::kSchema, "row " + std::to_string(row) + ": missing column '" + name + "'");
  if (it->is_string()) return strip_trailing_newline(it->get<std::string>());
  if (it->is_number_integer() || it->is_number_unsigned()) return it->dump();
  throw Error(ErrorCode::kSchema, "row " + std::to_string(row) + ": column '" + name + "' is not a string");
}

Corpus parse_jsonl(std::istream& in, std::string source_name) {
  std::vector<ArgumentPairRecord> records;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kSchema, "row " + std::to_string(row) + ": invalid json: " + e.what());
    }
    if (!obj.is_object()) throw Error(ErrorCode::kSchema, "row " + std::to_string(row) + ": expected a json object");
    ArgumentPairRecord rec;
    rec.id = json_text(obj, "id", row);
    rec.topic = json_text(obj, "topic", row);
    rec.argument1 = json_text(obj, "argument1", row);
    rec.argument1_id = json_text(obj, "argument1_id", row);
    rec.argument2 = json_text(obj, "argument2", row);
    rec.argument2_id = json_text(obj, "argument2_id", row);
    auto label = obj.find("is_same_stance");
    if (label == obj.end()) label = obj.find(kLabelAlias);
    if (label == obj.end()) throw Error(ErrorCode::kSchema, "row " + std::to_string(row) + ": missing column 'is_same_stance'");
    if (label->is_boolean()) {
      rec.is_same_stance = label->get<bool>();
    } else if (label->is_string()) {
      rec.is_same_stance = parse_label(label->get<std::string>(), row);
    } else {
      throw Error(ErrorCode::kLabel, "row " + std::to_string(row) + ": cannot parse label " + label->dump());
    }
    records.push_back(std::move(rec));
  }
  return Corpus(std::move(records), std::move(source_name));
}

void write_csv_field(std::ostream& out, std::string_view value) {
  const bool needs_quotes = value.find_first_of(",\"\n\r") != std::string_view::npos ||
                            (!value.empty() && (value.front() == ' ' || value.back() == ' '));
  if (!needs_quotes) {
    out << value;
    return;
  }
  out << '"';
  for (char c : value) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace

CorpusFormat format_from_path(std::string_view path) {
  if (path.ends_with(".jsonl") || path.ends_with(".json")) return CorpusFormat::kJsonl;
  return CorpusFormat::kCsv;
}

Corpus::Corpus(std::vector<ArgumentPairRecord> records, std::string source_name)
    : records_(std::move(records)), source_name_(std::move(source_name)) {
  std::unordered_map<std::string_view, std::size_t> seen;
  seen.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& rec = records_[i];
    const std::string row = std::to_string(i + 1);
    if (rec.id.empty()) throw Error(ErrorCode::kSchema, "row " + row + ": empty id");
    auto [it, inserted] = seen.emplace(rec.id, i + 1);
    if (!inserted) {
      throw Error(ErrorCode::kDuplicateId,
                  "duplicate id '" + rec.id + "' in rows " + std::to_string(it->second) + " and " + row);
    }
    if (is_blank(rec.argument1)) throw Error(ErrorCode::kSchema, "row " + row + ": argument1 is empty");
    if (is_blank(rec.argument2)) throw Error(ErrorCode::kSchema, "row " + row + ": argument2 is empty");
  }
}

std::set<std::string> Corpus::topics() const {
  std::set<std::string> out;
  for (const auto& rec : records_) out.insert(rec.topic);
  return out;
}

const std::vector<std::string>& corpus_field_names() {
  static const std::vector<std::string> names = {"id",           "topic",     "argument1",     "argument1_id",
                                                 "argument2",    "argument2_id", "is_same_stance"};
  return names;
}

Corpus parse_corpus(std::istream& in, CorpusFormat format, std::string source_name) {
  return format == CorpusFormat::kCsv ? parse_csv(in, std::move(source_name))
                                      : parse_jsonl(in, std::move(source_name));
}

Corpus load_corpus(const std::string& path) { return load_corpus(path, format_from_path(path)); }

Corpus load_corpus(const std::string& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return parse_corpus(in, format, path);
}

void write_corpus(std::ostream& out, const Corpus& corpus, CorpusFormat format) {
  if (format == CorpusFormat::kJsonl) {
    for (const auto& rec : corpus.records()) {
      json obj = {{"id", rec.id},
                  {"topic", rec.topic},
                  {"argument1", rec.argument1},
                  {"argument1_id", rec.argument1_id},
                  {"argument2", rec.argument2},
                  {"argument2_id", rec.argument2_id},
                  {"is_same_stance", rec.is_same_stance}};
      out << obj.dump() << '\n';
    }
    return;
  }
  const auto& names = corpus_field_names();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (const auto& rec : corpus.records()) {
    for (const std::string* f : {&rec.id, &rec.topic, &rec.argument1, &rec.argument1_id, &rec.argument2,
                                 &rec.argument2_id}) {
      write_csv_field(out, *f);
      out << ',';
    }
    out << (rec.is_same_stance ? "True" : "False") << '\n';
  }
}

void save_corpus(const std::string& path, const Corpus& corpus, CorpusFormat format) {
  std::ostringstream ss;
  write_corpus(ss, corpus, format);
  detail::write_file(path, ss.str());
}

TopicCounts ClassStatistics::overall() const {
  TopicCounts sum;
  for (const auto& [topic, c] : per_topic) {
    sum.same_side += c.same_side;
    sum.different_side += c.different_side;
    sum.total += c.total;
  }
  return sum;
}

ClassStatistics class_statistics(const Corpus& corpus) {
  ClassStatistics stats;
  for (const auto& rec : corpus.records()) {
    auto& c = stats.per_topic[rec.topic];
    (rec.is_same_stance ? c.same_side : c.different_side) += 1;
    c.total += 1;
  }
  return stats;
}

std::string class_statistics_json(const ClassStatistics& stats) {
  const auto counts = [](const TopicCounts& c) {
    return json{{"same_side", c.same_side}, {"different_side", c.different_side}, {"total", c.total}};
  };
  json topics = json::object();
  for (const auto& [topic, c] : stats.per_topic) topics[topic] = counts(c);
  json doc = {{"per_topic", topics}, {"overall", counts(stats.overall())}};
  return doc.dump(2) + "\n";
}

std::string class_statistics_markdown(const ClassStatistics& stats) {
  std::ostringstream out;
  out << "| class |";
  for (const auto& [topic, c] : stats.per_topic) out << " topic: " << topic << " |";
  out << " all |\n|---|";
  for (std::size_t i = 0; i <= stats.per_topic.size(); ++i) out << "---:|";
  out << '\n';
  const auto row = [&](const char* name, auto member) {
    out << "| " << name << " |";
    for (const auto& [topic, c] : stats.per_topic) out << ' ' << detail::with_thousands(c.*member) << " |";
    out << ' ' << detail::with_thousands(stats.overall().*member) << " |\n";
  };
  row("Same Side", &TopicCounts::same_side);
  row("Different Side", &TopicCounts::different_side);
  row("Total", &TopicCounts::total);
  return out.str();
}

std::size_t train_size_for(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "split fraction must lie in (0, 1), got " + detail::shortest(fraction));
  }
  // Nudge by a few ulps so fractions like 0.9 that are slightly below their
  // decimal value in binary still floor as the decimal product would.
  const double product = fraction * static_cast<double>(n);
  const double nudged = std::nextafter(std::nextafter(product, HUGE_VAL), HUGE_VAL);
  return std::min(n, static_cast<std::size_t>(std::floor(nudged)));
}

DataSplit split(const Corpus& corpus, double fraction, std::uint64_t seed) {
  const std::size_t n_train = train_size_for(corpus.size(), fraction);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<ArgumentPairRecord> train, test;
  train.reserve(n_train);
  test.reserve(corpus.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? train : test).push_back(corpus[order[i]]);
  return DataSplit{Corpus(std::move(train), corpus.source_name() + ":train"),
                   Corpus(std::move(test), corpus.source_name() + ":test"), fraction, seed};
}

Corpus filter_untruncated(const Corpus& corpus, const Vocabulary& vocab, std::size_t max_seq_len) {
  std::vector<ArgumentPairRecord> kept;
  for (const auto& rec : corpus.records()) {
    if (encoded_length(rec, vocab) <= max_seq_len) kept.push_back(rec);
  }
  return Corpus(std::move(kept), corpus.source_name());
}

LengthHistogram histogram_from_lengths(const std::vector<std::size_t>& lengths, std::size_t bucket_width,
                                       const std::vector<std::size_t>& thresholds) {
  if (bucket_width == 0) throw Error(ErrorCode::kInvalidArgument, "bucket width must be >= 1");
  if (lengths.empty()) throw Error(ErrorCode::kEmptyData, "cannot build a length histogram of an empty corpus");
  LengthHistogram hist;
  hist.bucket_width = bucket_width;
  hist.total_pairs = lengths.size();
  for (std::size_t len : lengths) ++hist.buckets[len / bucket_width];
  for (std::size_t t : thresholds) {
    const auto n = std::count_if(lengths.begin(), lengths.end(), [t](std::size_t len) { return len <= t; });
    hist.fraction_leq[t] = static_cast<double>(n) / static_cast<double>(lengths.size());
  }
  return hist;
}

LengthHistogram length_histogram(const Corpus& corpus, const Vocabulary& vocab, std::size_t bucket_width,
                                 const std::vector<std::size_t>& thresholds) {
  if (bucket_width == 0) throw Error(ErrorCode::kInvalidArgument, "bucket width must be >= 1");
  std::vector<std::size_t> lengths;
  lengths.reserve(corpus.size());
  for (const auto& rec : corpus.records()) lengths.push_back(encoded_length(rec, vocab));
  return histogram_from_lengths(lengths, bucket_width, thresholds);
}

std::string LengthHistogram::to_json() const {
  json bucket_list = json::array();
  for (const auto& [index, count] : buckets) {
    bucket_list.push_back({{"bucket_start", index * bucket_width}, {"count", count}});
  }
  json fractions = json::object();
  for (const auto& [t, f] : fraction_leq) fractions[std::to_string(t)] = f;
  json doc = {{"bucket_width", bucket_width},
              {"total_pairs", total_pairs},
              {"buckets", bucket_list},
              {"fraction_leq", fractions}};
  return doc.dump(2) + "\n";
}

std::string LengthHistogram::to_csv() const {
  std::string out = "bucket_start,count\n";
  for (const auto& [index, count] : buckets) {
    out += std::to_string(index * bucket_width) + "," + std::to_string(count) + "\n";
  }
  return out;
}

LengthHistogram LengthHistogram::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "bucket_start,count") {
    throw Error(ErrorCode::kFormat, "histogram csv: expected header 'bucket_start,count'");
  }
  std::vector<std::pair<std::size_t, std::size_t>> rows;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      const std::size_t start = std::stoul(line.substr(0, comma));
      const std::size_t count = std::stoul(line.substr(comma + 1));
      rows.emplace_back(start, count);
      width = std::gcd(width, start);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kFormat, "histogram csv: malformed row '" + line + "'");
    }
  }
  if (rows.empty()) throw Error(ErrorCode::kEmptyData, "histogram csv has no rows");
  LengthHistogram hist;
  hist.bucket_width = width == 0 ? 1 : width;
  for (const auto& [start, count] : rows) {
    hist.buckets[start / hist.bucket_width] += count;
    hist.total_pairs += count;
  }
  return hist;
}

}  // namespace sameside
