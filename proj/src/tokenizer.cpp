#include "sameside/tokenizer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "sameside/error.hpp"
#include "unicode_tables.hpp"
#include "util.hpp"

namespace sameside {
namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  return specials;
}

bool in_ranges(std::span<const unicode::CodepointRange> ranges, char32_t cp) {
  auto it = std::upper_bound(ranges.begin(), ranges.end(), cp,
                             [](char32_t value, const unicode::CodepointRange& r) { return value < r.first; });
  return it != ranges.begin() && cp <= std::prev(it)->last;
}

// Codepoint boundaries (byte offsets) of a UTF-8 token, including the end.
std::vector<std::size_t> char_boundaries(std::string_view token) {
  std::vector<std::size_t> bounds{0};
  std::size_t pos = 0;
  while (pos < token.size()) {
    detail::decode_utf8(token, pos);
    bounds.push_back(pos);
  }
  return bounds;
}

}  // namespace

bool is_punctuation(char32_t cp) { return in_ranges(unicode::punctuation_ranges(), cp); }

bool is_whitespace(char32_t cp) { return in_ranges(unicode::whitespace_ranges(), cp); }

char32_t to_lower(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  const auto table = unicode::lowercase_mappings();
  auto it = std::lower_bound(table.begin(), table.end(), cp,
                             [](const unicode::CaseMapping& m, char32_t value) { return m.from < value; });
  return (it != table.end() && it->from == cp) ? it->to : cp;
}

std::vector<std::string> basic_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char32_t cp = detail::decode_utf8(text, pos);
    if (is_whitespace(cp)) {
      flush();
    } else if (is_punctuation(cp)) {
      flush();
      detail::append_utf8(current, to_lower(cp));
      flush();
    } else if (cp == 0 || cp == 0xFFFD || (cp < 0x20) || (cp >= 0x7F && cp < 0xA0)) {
      // Control characters and invalid bytes are dropped.
      continue;
    } else {
      detail::append_utf8(current, to_lower(cp));
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() : Vocabulary(special_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const auto& specials = special_tokens();
  if (tokens_.size() < specials.size() || !std::equal(specials.begin(), specials.end(), tokens_.begin())) {
    throw Error(ErrorCode::kFormat, "vocabulary must start with [PAD], [UNK], [CLS], [SEP]");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& tok = tokens_[i];
    if (tok.empty()) throw Error(ErrorCode::kFormat, "empty vocabulary entry at id " + std::to_string(i));
    if (!index_.emplace(tok, static_cast<TokenId>(i)).second) {
      throw Error(ErrorCode::kFormat, "vocabulary entry '" + tok + "' appears twice");
    }
    if (i < specials.size()) continue;
    const std::string_view piece = std::string_view(tok).starts_with(kContinuationPrefix)
                                       ? std::string_view(tok).substr(kContinuationPrefix.size())
                                       : std::string_view(tok);
    max_piece_bytes_ = std::max(max_piece_bytes_, piece.size());
    if (piece.size() == tok.size()) {
      std::size_t pos = 0;
      const char32_t cp = detail::decode_utf8(tok, pos);
      if (pos == tok.size()) alphabet_.insert(cp);
    }
  }
  max_size = tokens_.size();
}

TokenId Vocabulary::find(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? TokenId{-1} : it->second;
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& tok : tokens_) out << tok << '\n';
}

void Vocabulary::save(const std::string& path) const {
  std::ostringstream ss;
  save(ss);
  detail::write_file(path, ss.str());
}

Vocabulary Vocabulary::load(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open vocabulary '" + path + "'");
  return load(in);
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size, std::size_t min_freq) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyData, "cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> word_freq;
  std::map<std::string, bool> chars;  // ordered by UTF-8 bytes
  for (const auto& rec : corpus.records()) {
    for (const std::string* text : {&rec.argument1, &rec.argument2}) {
      for (auto& word : basic_tokenize(*text)) {
        const auto bounds = char_boundaries(word);
        for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
          chars.emplace(word.substr(bounds[i], bounds[i + 1] - bounds[i]), true);
        }
        ++word_freq[std::move(word)];
      }
    }
  }

  const std::size_t floor_size = kNumSpecialTokens + 2 * chars.size();
  if (max_size < floor_size) {
    throw Error(ErrorCode::kInvalidArgument, "max vocabulary size " + std::to_string(max_size) +
                                                 " is smaller than specials + alphabet (" +
                                                 std::to_string(floor_size) + ")");
  }

  std::vector<std::string> tokens = special_tokens();
  for (const auto& [ch, _] : chars) tokens.push_back(ch);
  for (const auto& [ch, _] : chars) tokens.push_back(std::string(kContinuationPrefix) + ch);

  std::vector<std::pair<std::string, std::size_t>> words;
  for (auto& [word, freq] : word_freq) {
    if (freq >= min_freq && !chars.contains(word)) words.emplace_back(word, freq);
  }
  std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [word, freq] : words) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(word);
  }

  Vocabulary vocab(std::move(tokens));
  vocab.max_size = max_size;
  vocab.min_freq = min_freq;
  return vocab;
}

std::vector<TokenId> wordpiece(std::string_view token, const Vocabulary& vocab) {
  const auto bounds = char_boundaries(token);
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    std::size_t pos = bounds[i];
    if (!vocab.in_alphabet(detail::decode_utf8(token, pos))) return {kUnkId};
  }

  std::vector<TokenId> pieces;
  std::string candidate;
  std::size_t start = 0;  // index into bounds
  const std::size_t n_chars = bounds.size() - 1;
  while (start < n_chars) {
    TokenId found = -1;
    std::size_t end = n_chars;
    // Skip candidates longer than any vocabulary piece.
    while (end > start && bounds[end] - bounds[start] > vocab.max_piece_bytes()) --end;
    for (; end > start; --end) {
      candidate.clear();
      if (start > 0) candidate.append(kContinuationPrefix);
      candidate.append(token.substr(bounds[start], bounds[end] - bounds[start]));
      found = vocab.find(candidate);
      if (found >= 0) break;
    }
    if (found < 0) return {kUnkId};
    pieces.push_back(found);
    start = end;
  }
  return pieces;
}

std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (const auto& word : basic_tokenize(text)) {
    const auto pieces = wordpiece(word, vocab);
    ids.insert(ids.end(), pieces.begin(), pieces.end());
  }
  return ids;
}

std::pair<std::size_t, std::size_t> truncated_lengths(std::size_t len_a, std::size_t len_b, std::size_t budget) {
  if (budget < 2) throw Error(ErrorCode::kInvalidArgument, "truncation budget must be >= 2");
  if (len_a + len_b <= budget) return {len_a, len_b};
  // Ties remove from b, so a keeps the odd token of a balanced split.
  const std::size_t half_a = (budget + 1) / 2;
  const std::size_t half_b = budget / 2;
  if (len_a <= half_a) return {len_a, budget - len_a};
  if (len_b <= half_b) return {budget - len_b, len_b};
  return {half_a, half_b};
}

std::size_t EncodedPair::unpadded_length() const {
  return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), 1));
}

EncodedPair encode_pair(const ArgumentPairRecord& rec, const Vocabulary& vocab, std::size_t max_seq_len) {
  if (max_seq_len < kMinSequenceLength || max_seq_len > kMaxSequenceLength) {
    throw Error(ErrorCode::kInvalidArgument, "max_seq_len must lie in [8, 512], got " + std::to_string(max_seq_len));
  }
  std::vector<TokenId> a = tokenize(rec.argument1, vocab);
  std::vector<TokenId> b = tokenize(rec.argument2, vocab);
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::kEncode, "pair '" + rec.id + "': argument" + (a.empty() ? "1" : "2") +
                                        " is empty after tokenization");
  }
  truncate_pair(a, b, max_seq_len - 3);

  EncodedPair enc;
  enc.label = rec.is_same_stance;
  enc.pair_id = rec.id;
  enc.token_ids.reserve(max_seq_len);
  enc.token_ids.push_back(kClsId);
  enc.token_ids.insert(enc.token_ids.end(), a.begin(), a.end());
  enc.token_ids.push_back(kSepId);
  const std::size_t first_segment = enc.token_ids.size();
  enc.token_ids.insert(enc.token_ids.end(), b.begin(), b.end());
  enc.token_ids.push_back(kSepId);
  const std::size_t used = enc.token_ids.size();

  enc.token_ids.resize(max_seq_len, kPadId);
  enc.segment_ids.assign(max_seq_len, 1);
  std::fill_n(enc.segment_ids.begin(), first_segment, 0);
  enc.attention_mask.assign(max_seq_len, 0);
  std::fill_n(enc.attention_mask.begin(), used, 1);
  return enc;
}

std::vector<EncodedPair> encode_corpus(const Corpus& corpus, const Vocabulary& vocab, std::size_t max_seq_len) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (const auto& rec : corpus.records()) out.push_back(encode_pair(rec, vocab, max_seq_len));
  return out;
}

std::size_t encoded_length(const ArgumentPairRecord& rec, const Vocabulary& vocab) {
  return 3 + tokenize(rec.argument1, vocab).size() + tokenize(rec.argument2, vocab).size();
}

namespace {
constexpr char kEncodedMagic[8] = {'S', 'S', 'E', 'N', 'C', 'O', 'D', 'E'};

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::kFormat, "truncated encoded cache");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in) {
  const std::uint64_t lo = read_u32(in);
  return lo | (static_cast<std::uint64_t>(read_u32(in)) << 32);
}
}  // namespace

void write_encoded_cache(std::ostream& out, std::span<const EncodedPair> pairs, std::size_t max_seq_len) {
  std::string buf(kEncodedMagic, sizeof kEncodedMagic);
  detail::put_u32(buf, kEncodedCacheVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(max_seq_len));
  detail::put_u64(buf, pairs.size());
  for (const auto& p : pairs) {
    if (p.length() != max_seq_len) throw Error(ErrorCode::kInvalidArgument, "pair length differs from cache length");
    for (std::size_t i = 0; i < max_seq_len; ++i) {
      detail::put_u32(buf, static_cast<std::uint32_t>(p.token_ids[i]));
      detail::put_u32(buf, static_cast<std::uint32_t>(p.segment_ids[i]));
      detail::put_u32(buf, static_cast<std::uint32_t>(p.attention_mask[i]));
    }
    buf.push_back(p.label ? 1 : 0);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<EncodedPair> read_encoded_cache(std::istream& in) {
  char magic[sizeof kEncodedMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kEncodedMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::kFormat, "not an encoded-pair cache (bad magic)");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kEncodedCacheVersion) {
    throw Error(ErrorCode::kFormat, "unsupported encoded cache version " + std::to_string(version));
  }
  const std::size_t len = read_u32(in);
  const std::uint64_t count = read_u64(in);
  std::vector<EncodedPair> pairs;
  pairs.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t n = 0; n < count; ++n) {
    EncodedPair p;
    p.token_ids.resize(len);
    p.segment_ids.resize(len);
    p.attention_mask.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
      p.token_ids[i] = static_cast<TokenId>(read_u32(in));
      p.segment_ids[i] = static_cast<std::int32_t>(read_u32(in));
      p.attention_mask[i] = static_cast<std::int32_t>(read_u32(in));
    }
    char label;
    if (!in.get(label)) throw Error(ErrorCode::kFormat, "truncated encoded cache");
    p.label = label != 0;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace sameside
