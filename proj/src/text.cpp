#include "vh/text.hpp"

#include <cctype>
#include <charconv>

#include "vh/error.hpp"

namespace vh::text {

const Entry* Section::find(std::string_view key) const {
  const Entry* found = nullptr;
  for (const auto& e : entries) {
    if (e.key == key) found = &e;
  }
  return found;
}

std::vector<const Entry*> Section::find_all(std::string_view key) const {
  std::vector<const Entry*> out;
  for (const auto& e : entries) {
    if (e.key == key) out.push_back(&e);
  }
  return out;
}

void fail(int line, int column, const std::string& message) {
  throw Error(Errc::validation,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message);
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<Section> parse_sections(std::string_view text) {
  std::vector<Section> sections;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto t = trim(line);
    if (t.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    const int indent = static_cast<int>(line.find_first_not_of(" \t")) + 1;
    if (t.front() == '[') {
      if (t.back() != ']') fail(line_no, indent + static_cast<int>(t.size()) - 1, "expected ']'");
      auto words = split_ws(std::string_view(t).substr(1, t.size() - 2));
      if (words.empty()) fail(line_no, indent + 1, "empty section header");
      Section s;
      s.kind = words[0];
      for (std::size_t i = 1; i < words.size(); ++i) s.name += (i > 1 ? " " : "") + words[i];
      s.line = line_no;
      sections.push_back(std::move(s));
    } else {
      if (sections.empty()) fail(line_no, indent, "content before the first section");
      auto eq = line.find('=');
      if (eq != std::string_view::npos && line.find("->") == std::string_view::npos) {
        Entry e;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        e.line = line_no;
        auto vstart = line.find_first_not_of(" \t", eq + 1);
        e.value_column = static_cast<int>(vstart == std::string_view::npos ? eq + 2 : vstart + 1);
        if (e.key.empty()) fail(line_no, indent, "missing key before '='");
        sections.back().entries.push_back(std::move(e));
      } else {
        sections.back().raw.push_back({t, line_no});
      }
    }
    if (nl == text.size()) break;
  }
  return sections;
}

std::int64_t parse_int(const std::string& s, int line, int column) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) fail(line, column, "expected an integer, got '" + s + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& s, int line, int column) {
  std::uint64_t v = 0;
  int base = 10;
  std::string_view sv = s;
  if (sv.size() > 2 && sv[0] == '0' && (sv[1] == 'x' || sv[1] == 'X')) {
    base = 16;
    sv.remove_prefix(2);
  }
  auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v, base);
  if (ec != std::errc() || p != sv.data() + sv.size() || sv.empty()) {
    fail(line, column, "expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, int line, int column) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) fail(line, column, "expected a number, got '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    fail(line, column, "expected a number, got '" + s + "'");
  }
}

std::int64_t parse_whole_seconds(const std::string& s, int line, int column) {
  std::string body = s;
  if (!body.empty() && body.back() == 's') body.pop_back();
  if (body.find('.') != std::string::npos) {
    fail(line, column, "'" + s + "' is not on the 1 Hz grid (whole seconds only)");
  }
  return parse_int(body, line, column);
}

}  // namespace vh::text
