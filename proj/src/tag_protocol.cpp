#include "msr2/tag_protocol.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <regex>

#include "msr2/error.hpp"

namespace msr2 {

namespace {

struct TagEntry {
  std::string_view name;
  SegmentKind kind;
};

constexpr std::array<TagEntry, 5> kTags{{
    {"reasoning", SegmentKind::Reasoning},
    {"factors", SegmentKind::Factors},
    {"search", SegmentKind::Search},
    {"information", SegmentKind::Information},
    {"answer", SegmentKind::Answer},
}};

std::optional<SegmentKind> kind_for_tag(std::string_view name) {
  for (const auto& t : kTags) {
    if (t.name == name) return t.kind;
  }
  return std::nullopt;
}

bool is_tag_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Length of a well-formed tag token "<name>" or "</name>" starting at pos, or 0.
std::size_t tag_token_length(std::string_view text, std::size_t pos) {
  if (pos >= text.size() || text[pos] != '<') return 0;
  std::size_t i = pos + 1;
  if (i < text.size() && text[i] == '/') ++i;
  const std::size_t name_begin = i;
  while (i < text.size() && is_tag_char(text[i])) ++i;
  if (i == name_begin || i >= text.size() || text[i] != '>') return 0;
  return i + 1 - pos;
}

std::string_view trim(std::string_view s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  auto b = std::find_if(s.begin(), s.end(), not_space);
  auto e = std::find_if(s.rbegin(), std::make_reverse_iterator(b), not_space).base();
  return s.substr(static_cast<std::size_t>(b - s.begin()), static_cast<std::size_t>(e - b));
}

Origin default_origin(SegmentKind kind) {
  return (kind == SegmentKind::Information || kind == SegmentKind::Rethink) ? Origin::Environment
                                                                             : Origin::Generated;
}

// Plain text may contain environment rethink sentences; split them out.
void push_plain(std::vector<Segment>& out, std::string_view text) {
  while (!text.empty()) {
    const auto hit = text.find(kRethinkMessage);
    if (hit == std::string_view::npos) {
      out.push_back({SegmentKind::Plain, std::string(text), Origin::Generated, {}});
      return;
    }
    if (hit > 0) out.push_back({SegmentKind::Plain, std::string(text.substr(0, hit)), Origin::Generated, {}});
    out.push_back({SegmentKind::Rethink, std::string(kRethinkMessage), Origin::Environment, {}});
    text.remove_prefix(hit + kRethinkMessage.size());
  }
}

void split_whitespace(std::string_view text, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t b = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > b) out.emplace_back(text.substr(b, i - b));
  }
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Reasoning: return "reasoning";
    case SegmentKind::Factors: return "factors";
    case SegmentKind::Search: return "search";
    case SegmentKind::Information: return "information";
    case SegmentKind::Answer: return "answer";
    case SegmentKind::Rethink: return "rethink";
    case SegmentKind::Plain: return "plain";
  }
  return "plain";
}

std::string_view to_string(Origin origin) {
  return origin == Origin::Generated ? "generated" : "environment";
}

SegmentKind segment_kind_from_string(std::string_view name) {
  if (auto k = kind_for_tag(name)) return *k;
  if (name == "rethink") return SegmentKind::Rethink;
  if (name == "plain") return SegmentKind::Plain;
  throw Error(ErrorCode::ParseError, "unknown segment kind '" + std::string(name) + "'");
}

Origin origin_from_string(std::string_view name) {
  if (name == "generated") return Origin::Generated;
  if (name == "environment") return Origin::Environment;
  throw Error(ErrorCode::ParseError, "unknown origin '" + std::string(name) + "'");
}

std::string_view tag_name(SegmentKind kind) {
  for (const auto& t : kTags) {
    if (t.kind == kind) return t.name;
  }
  return {};
}

std::vector<std::string> mock_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t run_begin = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t special = 0;
    if (text[i] == '<') {
      special = tag_token_length(text, i);
    } else if (text.substr(i, kRethinkMessage.size()) == kRethinkMessage) {
      special = kRethinkMessage.size();
    }
    if (special == 0) {
      ++i;
      continue;
    }
    split_whitespace(text.substr(run_begin, i - run_begin), tokens);
    if (text[i] == '<') {
      tokens.emplace_back(text.substr(i, special));
    } else {
      split_whitespace(text.substr(i, special), tokens);
    }
    i += special;
    run_begin = i;
  }
  split_whitespace(text.substr(run_begin), tokens);
  return tokens;
}

std::vector<Segment> parse_trajectory(std::string_view text) {
  std::vector<Segment> segments;
  std::size_t plain_begin = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto lt = text.find('<', pos);
    if (lt == std::string_view::npos) break;
    const std::size_t len = tag_token_length(text, lt);
    if (len == 0 || text[lt + 1] == '/') {
      pos = lt + 1;
      continue;
    }
    const auto name = text.substr(lt + 1, len - 2);
    const auto kind = kind_for_tag(name);
    if (!kind) {
      pos = lt + len;
      continue;
    }
    const std::string close = "</" + std::string(name) + ">";
    const auto inner_begin = lt + len;
    const auto close_at = text.find(close, inner_begin);
    if (close_at == std::string_view::npos) {
      throw Error(ErrorCode::MalformedTag,
                  "<" + std::string(name) + "> at byte " + std::to_string(lt) + " is never closed");
    }
    push_plain(segments, text.substr(plain_begin, lt - plain_begin));
    segments.push_back({*kind, std::string(text.substr(inner_begin, close_at - inner_begin)),
                        default_origin(*kind), {}});
    pos = close_at + close.size();
    plain_begin = pos;
  }
  push_plain(segments, text.substr(plain_begin));

  std::size_t cursor = 0;
  for (auto& s : segments) {
    const auto n = mock_tokenize(render_segment(s)).size();
    s.token_span = {cursor, cursor + n};
    cursor += n;
  }
  return segments;
}

std::string render_segment(const Segment& segment) {
  const auto name = tag_name(segment.kind);
  if (name.empty()) return segment.text;
  std::string out;
  out.reserve(segment.text.size() + 2 * name.size() + 5);
  out.append("<").append(name).append(">").append(segment.text).append("</").append(name).append(">");
  return out;
}

std::string render_trajectory(const std::vector<Segment>& segments) {
  std::string out;
  for (const auto& s : segments) out += render_segment(s);
  return out;
}

SearchAction extract_search(const Segment& segment) {
  if (segment.kind != SegmentKind::Search) {
    throw Error(ErrorCode::ParseError, "extract_search called on a " + std::string(to_string(segment.kind)) +
                                           " segment");
  }
  const auto inner = trim(segment.text);
  SearchAction action;
  // Source tags are case-insensitive, unlike protocol tags.
  std::size_t open_len = 0;
  if (!inner.empty() && inner[0] == '<') {
    std::size_t i = 1;
    while (i < inner.size() && (std::isalnum(static_cast<unsigned char>(inner[i])) || inner[i] == '_' || inner[i] == '-')) ++i;
    if (i > 1 && i < inner.size() && inner[i] == '>') open_len = i + 1;
  }
  if (open_len > 0) {
    const auto name = inner.substr(1, open_len - 2);
    const std::string close = "</" + std::string(name) + ">";
    if (inner.size() >= open_len + close.size() && inner.substr(inner.size() - close.size()) == close) {
      std::string tag(name);
      std::transform(tag.begin(), tag.end(), tag.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      action.source_tag = std::move(tag);
      action.query = std::string(trim(inner.substr(open_len, inner.size() - open_len - close.size())));
    } else {
      action.query = std::string(inner);
    }
  } else {
    action.query = std::string(inner);
  }
  if (action.query.empty()) throw Error(ErrorCode::EmptyQuery, "search block has no query text");
  return action;
}

SentenceValue extract_answer(std::string_view text) {
  static const std::regex kWithUnit(
      R"((\d+(?:\.\d+)?)\s*(years?|yrs?|months?)\b(?:[\s,]*(?:and\s+)?(\d+(?:\.\d+)?)\s*months?\b)?)",
      std::regex::icase);
  static const std::regex kBare(R"(\d+(?:\.\d+)?)");

  const std::string s(text);
  std::smatch m;
  if (std::regex_search(s, m, kWithUnit)) {
    const auto first = to_double(m[1].str());
    std::string unit = m[2].str();
    std::transform(unit.begin(), unit.end(), unit.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (first) {
      double months = unit.starts_with("y") ? *first * 12.0 : *first;
      if (unit.starts_with("y") && m[3].matched) {
        const auto extra = to_double(m[3].str());
        if (extra) months += *extra;
      }
      return {months};
    }
  }
  if (std::regex_search(s, m, kBare)) {
    if (const auto v = to_double(m[0].str())) return {*v};
  }
  throw Error(ErrorCode::UnparsableAnswer, "no sentence value in '" + s + "'");
}

std::string format_months(double months) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", months);
  std::string out(buf);
  while (!out.empty() && out.back() == '0') out.pop_back();
  if (!out.empty() && out.back() == '.') out.pop_back();
  return out;
}

FactorList extract_factors(std::string_view text) {
  static const std::regex kEnumerator(R"(^(?:\d+\s*[.):]|[-*]|\xE2\x80\xA2|\xC2\xB7)\s*)");
  FactorList list;
  list.raw_text = std::string(text);
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(trim(text.substr(start, nl - start)));
    line = std::regex_replace(line, kEnumerator, "", std::regex_constants::format_first_only);
    const auto item = trim(line);
    if (!item.empty()) list.factors.emplace_back(item);
    start = nl + 1;
  }
  return list;
}

std::string render_information(const std::vector<Evidence>& evidence) {
  if (evidence.empty()) throw Error(ErrorCode::EmptyEvidence, "no evidence to render");
  std::string out = "<information>\n";
  for (const auto& e : evidence) {
    out += "[" + std::to_string(e.rank) + "] source=" + e.source_id + " doc=" + e.doc_id + "\n";
    out += e.text;
    out += "\n";
  }
  out += "</information>";
  return out;
}

std::string render_empty_information() { return "<information>\n</information>"; }

std::optional<std::string> final_answer(const std::vector<Segment>& segments) {
  for (auto it = segments.rbegin(); it != segments.rend(); ++it) {
    if (it->kind == SegmentKind::Answer) return it->text;
  }
  return std::nullopt;
}

}  // namespace msr2
