#pragma once

#include <cstdint>
#include <span>

namespace sameside::unicode {

struct CodepointRange {
  char32_t first;
  char32_t last;
};

struct CaseMapping {
  char32_t from;
  char32_t to;
};

// Sorted, non-overlapping.
std::span<const CodepointRange> punctuation_ranges();
std::span<const CodepointRange> whitespace_ranges();
// Sorted by `from`. Only one-to-one mappings are listed.
std::span<const CaseMapping> lowercase_mappings();

}  // namespace sameside::unicode
