#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vh::text {

// Named-section text files shared by tag definitions and scenarios:
//
//   # comment
//   [kind optional-name]
//   key = value
//   free-form line
//
// Lines without '=' are kept verbatim (used by [transitions]).

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
  int value_column = 0;
};

struct RawLine {
  std::string text;
  int line = 0;
};

struct Section {
  std::string kind;
  std::string name;
  int line = 0;
  std::vector<Entry> entries;
  std::vector<RawLine> raw;

  const Entry* find(std::string_view key) const;
  std::vector<const Entry*> find_all(std::string_view key) const;
};

std::vector<Section> parse_sections(std::string_view text);

/// Throws vh::Error(validation) with "line L, column C: message".
[[noreturn]] void fail(int line, int column, const std::string& message);

std::string trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);

std::int64_t parse_int(const std::string& s, int line, int column);
std::uint64_t parse_uint(const std::string& s, int line, int column);
double parse_double(const std::string& s, int line, int column);
/// "10s", "10" -> 10; rejects fractional seconds.
std::int64_t parse_whole_seconds(const std::string& s, int line, int column);

}  // namespace vh::text
