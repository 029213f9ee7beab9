#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sameside::detail {

// Decodes one UTF-8 sequence starting at text[pos]; advances pos. Malformed
// bytes decode to U+FFFD and consume a single byte.
char32_t decode_utf8(std::string_view text, std::size_t& pos);
void append_utf8(std::string& out, char32_t cp);

// printf-style "%.*f" without locale dependence.
std::string fixed(double value, int decimals);
// Shortest round-trippable representation ("%.17g" trimmed).
std::string shortest(double value);

std::string with_thousands(std::size_t value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep);

void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);

}  // namespace sameside::detail
