#pragma once

// Multi-turn rollout: the policy generates until a stop tag, searches are
// routed and answered with an <information> block, malformed turns get the
// rethink message, and the loop ends on an answer or after B turns.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msr2/clients.hpp"
#include "msr2/error.hpp"
#include "msr2/retrieval.hpp"
#include "msr2/tag_protocol.hpp"

namespace msr2 {

enum class ActionKind { Search, Answer, Malformed };
enum class Terminal { Answered, BudgetExhausted };

std::string_view to_string(ActionKind kind);
std::string_view to_string(Terminal terminal);

struct RolloutConfig {
  int budget_B = 8;
  std::size_t top_k = kDefaultTopK;
  std::size_t max_prompt_tokens = 16384;
  std::size_t max_response_tokens = 8192;
  std::vector<std::string> stop_tags{"</search>", "</answer>"};

  /// Throws InvalidConfig naming the offending field.
  void validate() const;
};

/// What happened in one turn; enough to replay reward computation offline.
struct TurnRecord {
  ActionKind action = ActionKind::Malformed;
  std::string chunk;
  FinishReason finish = FinishReason::EndOfSequence;
  std::optional<SearchAction> search;
  std::string routed_source;
  bool route_warning = false;
  std::vector<Evidence> evidence;
};

struct Trajectory {
  std::string input_fact;
  /// Response segments; token spans index into `tokens`.
  std::vector<Segment> segments;
  std::vector<TokenId> tokens;
  std::vector<Origin> origin_mask;
  /// Generator log-probs aligned with `tokens` (0 on environment tokens);
  /// empty when the generator does not report them.
  std::vector<double> logprobs;
  int search_count = 0;
  int budget_used = 0;
  Terminal terminal = Terminal::BudgetExhausted;
  std::vector<TurnRecord> turns;

  std::size_t generated_token_count() const;
  std::string response_text() const { return render_trajectory(segments); }
};

/// Raised when the generator (or a retrieval dependency) fails mid-rollout.
class RolloutAbortedError : public Error {
 public:
  RolloutAbortedError(const std::string& message, Trajectory partial)
      : Error(ErrorCode::RolloutAborted, message), partial_(std::move(partial)) {}

  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

/// Search iff the chunk holds a complete search block, else Answer iff it
/// holds an answer close tag, else Malformed.
ActionKind classify_action(std::string_view chunk);

struct PromptContext {
  std::string text;
  std::vector<TokenId> tokens;
  /// Oldest response segments left out to fit max_prompt_tokens.
  std::size_t dropped_segments = 0;
};

/// Fact followed by the most recent whole segments that fit in
/// max_prompt_tokens. Throws FactTooLong when the fact alone does not fit.
PromptContext truncate_context(std::string_view fact, const Trajectory& trajectory, const RolloutConfig& config);

/// Runs one rollout. Deterministic for a deterministic generator.
Trajectory run_rollout(std::string_view fact, Generator& generator, const SourceRegistry& registry,
                       const RolloutConfig& config = {});

/// G independent rollouts of the same fact, one generator session each, at
/// most `max_concurrency` at a time (1 when the generator does not support
/// concurrent sessions). Results are in sample order.
std::vector<Trajectory> run_group(std::string_view fact, const GeneratorFactory& factory, std::size_t group_size,
                                  const SourceRegistry& registry, const RolloutConfig& config = {},
                                  std::size_t max_concurrency = 1);

/// Environment tokens are exactly those of Information and Rethink segments,
/// spans tile `tokens`, and each environment segment is the block the engine
/// injected for its turn. Returns the first violation.
std::optional<std::string> check_origin_soundness(const Trajectory& trajectory);

// ---------------------------------------------------------------------------
// Trace files: one JSON object per line.

std::string trajectory_to_json_line(const Trajectory& trajectory);
Trajectory trajectory_from_json_line(std::string_view line);

void write_trace(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trace(const std::filesystem::path& path);

}  // namespace msr2
