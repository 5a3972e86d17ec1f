#include <array>
#include <cctype>
#include <string_view>

#include "topicloop/llm_client.hpp"

namespace topicloop {

namespace {

constexpr std::array<std::string_view, 3> kOpenBrackets{"[", "\xEF\xBC\xBB" /* ［ */, "\xE3\x80\x90" /* 【 */};
constexpr std::array<std::string_view, 3> kCloseBrackets{"]", "\xEF\xBC\xBD" /* ］ */, "\xE3\x80\x91" /* 】 */};
constexpr std::array<std::string_view, 8> kQuotes{
    "\"", "'", "\xE2\x80\x9C" /* “ */, "\xE2\x80\x9D" /* ” */, "\xE2\x80\x98" /* ‘ */,
    "\xE2\x80\x99" /* ’ */, "\xEF\xBC\x82" /* ＂ */, "\xEF\xBC\x87" /* ＇ */};
constexpr std::array<std::string_view, 4> kSeparators{",", "\xEF\xBC\x8C" /* ， */, "\xE3\x80\x81" /* 、 */, ";"};

template <std::size_t N>
std::size_t match_any(std::string_view s, std::size_t pos, const std::array<std::string_view, N>& set) {
  for (auto tok : set)
    if (s.substr(pos, tok.size()) == tok) return tok.size();
  return 0;
}

template <std::size_t N>
std::pair<std::size_t, std::size_t> find_any(std::string_view s, std::size_t from,
                                             const std::array<std::string_view, N>& set) {
  for (std::size_t i = from; i < s.size(); ++i)
    if (auto n = match_any(s, i, set)) return {i, n};
  return {std::string_view::npos, 0};
}

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  // Full-width space.
  while (s.substr(0, 3) == "\xE3\x80\x80") s.remove_prefix(3);
  while (s.size() >= 3 && s.substr(s.size() - 3) == "\xE3\x80\x80") s.remove_suffix(3);
  return s;
}

/// Items of a list body: quoted strings if any quotes are present,
/// otherwise separator-delimited fields.
std::vector<std::string> list_items(std::string_view body) {
  std::vector<std::string> items;
  bool quoted = false;
  std::size_t i = 0;
  while (i < body.size()) {
    const auto open = match_any(body, i, kQuotes);
    if (!open) {
      ++i;
      continue;
    }
    quoted = true;
    const auto [close, close_len] = find_any(body, i + open, kQuotes);
    if (close == std::string_view::npos) break;
    auto item = body.substr(i + open, close - i - open);
    if (!trim(item).empty()) items.emplace_back(item);
    i = close + close_len;
  }
  if (quoted) return items;

  std::size_t start = 0;
  for (std::size_t j = 0; j <= body.size(); ++j) {
    const auto sep = j < body.size() ? match_any(body, j, kSeparators) : 1;
    if (!sep) continue;
    auto field = trim(body.substr(start, j - start));
    if (!field.empty()) items.emplace_back(field);
    start = j + sep;
    j = start - 1;
  }
  return items;
}

/// First bracketed list at or after `from`; nullopt-like empty flag when none.
bool bracket_body(std::string_view s, std::size_t from, std::string_view& body) {
  const auto [open, open_len] = find_any(s, from, kOpenBrackets);
  if (open == std::string_view::npos) return false;
  const auto [close, close_len] = find_any(s, open + open_len, kCloseBrackets);
  (void)close_len;
  body = close == std::string_view::npos ? s.substr(open + open_len) : s.substr(open + open_len, close - open - open_len);
  return true;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

Verdict parse_verdict(const std::string& raw) {
  std::string lower(raw.size(), '\0');
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    lower[i] = c < 0x80 ? static_cast<char>(std::tolower(c)) : raw[i];
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (i > 0 && is_word_char(lower[i - 1])) continue;
    for (std::string_view word : {std::string_view("yes"), std::string_view("no")}) {
      if (std::string_view(lower).substr(i, word.size()) != word) continue;
      const auto end = i + word.size();
      if (end < lower.size() && is_word_char(lower[end])) continue;
      Verdict v;
      if (word == "yes") return v;
      v.kind = VerdictKind::No;
      std::string_view body;
      if (bracket_body(raw, end, body)) v.rejected_words = list_items(body);
      return v;
    }
  }
  throw ParseError("no Yes/No verdict in response: " + raw.substr(0, 120));
}

std::vector<std::vector<std::string>> parse_topic_groups(const std::string& raw) {
  std::vector<std::vector<std::string>> groups;
  std::string_view text(raw);
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;

    std::vector<std::string> items;
    std::string_view body;
    if (bracket_body(line, 0, body)) {
      items = list_items(body);
    } else {
      auto colon = line.find(':');
      std::size_t colon_len = 1;
      const auto wide = line.find("\xEF\xBC\x9A" /* ： */);
      if (wide != std::string_view::npos && (colon == std::string_view::npos || wide < colon)) {
        colon = wide;
        colon_len = 3;
      }
      if (colon != std::string_view::npos) items = list_items(line.substr(colon + colon_len));
    }
    if (!items.empty()) groups.push_back(std::move(items));
    if (end == text.size()) break;
  }
  return groups;
}

}  // namespace topicloop
