#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sameside/corpus.hpp"

namespace sameside {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr std::size_t kNumSpecialTokens = 4;
inline constexpr std::string_view kContinuationPrefix = "##";
inline constexpr std::size_t kMaxSequenceLength = 512;
inline constexpr std::size_t kMinSequenceLength = 8;

// Lower-cased, whitespace-split text with punctuation as standalone tokens.
std::vector<std::string> basic_tokenize(std::string_view text);

bool is_punctuation(char32_t cp);
bool is_whitespace(char32_t cp);
char32_t to_lower(char32_t cp);

// Token <-> id table with fixed special ids ([PAD]=0, [UNK]=1, [CLS]=2,
// [SEP]=3). Immutable once constructed.
class Vocabulary {
 public:
  Vocabulary();
  // tokens[i] gets id i; the first four entries must be the specials.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // Returns -1 when absent.
  TokenId find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token) >= 0; }
  // Whether `cp` is a word-initial single-character entry.
  bool in_alphabet(char32_t cp) const { return alphabet_.contains(cp); }
  std::size_t max_piece_bytes() const { return max_piece_bytes_; }

  std::size_t max_size = 0;
  std::size_t min_freq = 0;

  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static Vocabulary load(std::istream& in);
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId, Hash, std::equal_to<>> index_;
  std::unordered_set<char32_t> alphabet_;
  std::size_t max_piece_bytes_ = 0;
};

inline constexpr std::size_t kDefaultVocabSize = 8192;
inline constexpr std::size_t kDefaultMinFreq = 2;

// Specials, then every character seen (as initial and as continuation piece),
// then whole words with frequency >= min_freq by descending frequency, ties
// broken lexicographically, until max_size.
Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size = kDefaultVocabSize,
                       std::size_t min_freq = kDefaultMinFreq);

// Greedy longest-match-first segmentation of one basic token.
std::vector<TokenId> wordpiece(std::string_view token, const Vocabulary& vocab);

// basic_tokenize followed by wordpiece.
std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab);

// Resulting lengths of the longest-first pair truncation.
std::pair<std::size_t, std::size_t> truncated_lengths(std::size_t len_a, std::size_t len_b,
                                                      std::size_t budget);

// Drops tail tokens of the currently longer sequence (ties drop from b)
// until |a| + |b| <= budget.
template <typename T>
void truncate_pair(std::vector<T>& a, std::vector<T>& b, std::size_t budget) {
  const auto [la, lb] = truncated_lengths(a.size(), b.size(), budget);
  a.resize(la);
  b.resize(lb);
}

struct EncodedPair {
  std::vector<TokenId> token_ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> attention_mask;
  bool label = false;
  std::string pair_id;

  std::size_t length() const { return token_ids.size(); }
  // Number of positions with mask 1.
  std::size_t unpadded_length() const;

  bool operator==(const EncodedPair&) const = default;
};

// [CLS] A' [SEP] B' [SEP], right-padded to max_seq_len.
EncodedPair encode_pair(const ArgumentPairRecord& rec, const Vocabulary& vocab, std::size_t max_seq_len);
std::vector<EncodedPair> encode_corpus(const Corpus& corpus, const Vocabulary& vocab, std::size_t max_seq_len);

// Untruncated encoded length: 3 specials + both argument subword lengths.
std::size_t encoded_length(const ArgumentPairRecord& rec, const Vocabulary& vocab);

// Binary cache of encoded pairs (pair ids are not stored).
inline constexpr std::uint32_t kEncodedCacheVersion = 1;
void write_encoded_cache(std::ostream& out, std::span<const EncodedPair> pairs, std::size_t max_seq_len);
std::vector<EncodedPair> read_encoded_cache(std::istream& in);

}  // namespace sameside
