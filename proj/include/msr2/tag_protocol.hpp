#pragma once

// Structured rollout text protocol: <reasoning>, <factors>, <search>,
// <information>, <answer> blocks plus the environment's rethink sentence.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace msr2 {

enum class SegmentKind { Reasoning, Factors, Search, Information, Answer, Rethink, Plain };
enum class Origin { Generated, Environment };

std::string_view to_string(SegmentKind kind);
std::string_view to_string(Origin origin);
SegmentKind segment_kind_from_string(std::string_view name);
Origin origin_from_string(std::string_view name);

/// Half-open [begin, end) range into a trajectory's token sequence.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const TokenSpan&) const = default;
};

struct Segment {
  SegmentKind kind = SegmentKind::Plain;
  /// Inner text for tagged kinds, raw text for Plain and Rethink.
  std::string text;
  Origin origin = Origin::Generated;
  TokenSpan token_span;

  bool operator==(const Segment&) const = default;
};

struct SearchAction {
  std::string query;
  std::optional<std::string> source_tag;
};

struct FactorList {
  std::vector<std::string> factors;
  std::string raw_text;
};

struct SentenceValue {
  double months = 0.0;

  bool operator==(const SentenceValue&) const = default;
};

/// One retrieved item as placed into an <information> block.
struct Evidence {
  std::string source_id;
  std::string doc_id;
  std::string text;
  double score = 0.0;
  int rank = 0;

  bool operator==(const Evidence&) const = default;
};

/// Appended by the environment when a turn ends without a valid action.
inline constexpr std::string_view kRethinkMessage = "My action is not correct. Let me rethink.";

/// Tag name used in the text for a tagged kind ("reasoning", ...). Plain and
/// Rethink have no tag and return an empty view.
std::string_view tag_name(SegmentKind kind);

/// Splits raw text into segments. Unknown tags are kept as Plain text; an
/// opening known tag without a matching close throws Error{MalformedTag}.
/// Token spans are assigned with mock_tokenize over each segment's rendering.
std::vector<Segment> parse_trajectory(std::string_view text);

/// Exact textual form of one segment (tags included).
std::string render_segment(const Segment& segment);
std::string render_trajectory(const std::vector<Segment>& segments);

SearchAction extract_search(const Segment& segment);

/// Months from "36", "36.5", "3 years", "2 years 6 months", "18 months".
/// Throws Error{UnparsableAnswer} when nothing numeric is found.
SentenceValue extract_answer(std::string_view text);

/// Shortest decimal rendering that extract_answer maps back to the same value.
std::string format_months(double months);

FactorList extract_factors(std::string_view text);

/// Bit-exact <information> block; throws Error{EmptyEvidence} on an empty list.
std::string render_information(const std::vector<Evidence>& evidence);

/// Block used by the rollout engine when a routed search retrieves nothing.
std::string render_empty_information();

/// Text of the final Answer segment, if any (the last one wins).
std::optional<std::string> final_answer(const std::vector<Segment>& segments);

/// Deterministic mock tokenization: whitespace-separated pieces, with every
/// tag and every rethink sentence boundary acting as a separator. Concatenating
/// the tokenizations of adjacent segments equals the tokenization of their
/// concatenation.
std::vector<std::string> mock_tokenize(std::string_view text);

}  // namespace msr2
