#pragma once

// Contracts for the three external models (policy generator, rubric judge,
// embedder), their HTTP clients, and deterministic mocks. The request and
// response bodies are documented in docs/protocol.md.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "msr2/embedder.hpp"
#include "msr2/error.hpp"

namespace msr2 {

using TokenId = std::int64_t;

/// Id of a mock token piece (31-bit FNV-1a).
TokenId mock_token_id(std::string_view piece);
std::vector<TokenId> mock_token_ids(std::string_view text);

// ---------------------------------------------------------------------------
// Transport configuration

struct Endpoint {
  std::string url;
  std::chrono::milliseconds timeout{30000};
  /// Sent as "Authorization: Bearer <token>" when non-empty.
  std::string bearer_token;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
  /// Injected so tests do not actually sleep.
  std::function<void(std::chrono::milliseconds)> sleep;

  std::chrono::milliseconds backoff_for(int attempt) const;
};

/// Endpoint settings from MSR2_GENERATOR_URL, MSR2_JUDGE_URL,
/// MSR2_EMBEDDER_URL, MSR2_TIMEOUT_MS and MSR2_API_TOKEN.
struct ClientEnvironment {
  std::optional<Endpoint> generator;
  std::optional<Endpoint> judge;
  std::optional<Endpoint> embedder;

  static ClientEnvironment from_env();
};

/// Caps concurrent upstream requests for one client.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t max_in_flight) : available_(max_in_flight == 0 ? 1 : max_in_flight) {}

  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t available_;
};

// ---------------------------------------------------------------------------
// Generator

struct GeneratorCapabilities {
  std::size_t max_context = 16384;
  std::size_t max_new_tokens = 8192;
  bool supports_logprobs = false;
  bool supports_concurrent_sessions = false;
};

enum class FinishReason { Stop, Length, EndOfSequence };

std::string_view to_string(FinishReason reason);

struct GenerationRequest {
  /// Fact followed by the (possibly truncated) trajectory so far.
  std::string context;
  std::vector<TokenId> context_tokens;
  std::vector<std::string> stop_tags;
  std::size_t max_new_tokens = 8192;
};

struct GenerationResult {
  std::string text;
  /// Absent when the generator does not expose ids; the caller then uses
  /// mock tokenization.
  std::optional<std::vector<TokenId>> tokens;
  std::optional<std::vector<double>> logprobs;
  FinishReason finish = FinishReason::EndOfSequence;
};

/// One generation session (a rollout). Sessions may keep per-rollout state.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual GeneratorCapabilities capabilities() const = 0;
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
};

using GeneratorFactory = std::function<std::unique_ptr<Generator>()>;

/// Truncates text just after the earliest stop tag. Returns whether a stop
/// tag was found.
bool apply_stop(std::string& text, const std::vector<std::string>& stop_tags);

/// Replays a fixed script (one entry per turn) or a rule keyed by the
/// SHA-256 of the context. Output is cut at the first stop tag, then at
/// max_new_tokens mock tokens. An exhausted script yields an empty
/// end-of-sequence turn.
class ScriptedGenerator final : public Generator {
 public:
  using Rule = std::function<std::string(const std::string& context_digest, const std::string& context)>;

  explicit ScriptedGenerator(std::vector<std::string> script);
  explicit ScriptedGenerator(Rule rule);

  GeneratorCapabilities capabilities() const override;
  GenerationResult generate(const GenerationRequest& request) override;

  std::size_t turns_served() const { return turn_; }

 private:
  std::vector<std::string> script_;
  Rule rule_;
  std::size_t turn_ = 0;
};

/// Shapes a raw reply the way ScriptedGenerator does (stop cut, token cap,
/// mock token ids when the reply carries none).
GenerationResult finalize_generation(std::string text, std::optional<std::vector<TokenId>> tokens,
                                     std::optional<std::vector<double>> logprobs, bool saw_eos,
                                     const GenerationRequest& request);

/// POST {url}/generate. Transport failures are retried per RetryPolicy and
/// then surface as GeneratorUnavailable; bad bodies raise ProtocolError.
class RemoteGenerator final : public Generator {
 public:
  RemoteGenerator(Endpoint endpoint, GeneratorCapabilities caps = {}, RetryPolicy retry = {});

  GeneratorCapabilities capabilities() const override { return caps_; }
  GenerationResult generate(const GenerationRequest& request) override;

 private:
  Endpoint endpoint_;
  GeneratorCapabilities caps_;
  RetryPolicy retry_;
};

// ---------------------------------------------------------------------------
// Judge

class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string judge(const std::string& prompt) = 0;
};

/// Fixed reply or a rule over the prompt. Counts calls.
class ScriptedJudge final : public Judge {
 public:
  explicit ScriptedJudge(std::string reply);
  explicit ScriptedJudge(std::function<std::string(const std::string&)> rule);

  std::string judge(const std::string& prompt) override;
  std::size_t calls() const;

 private:
  std::function<std::string(const std::string&)> rule_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

/// POST {url}/judge. Failures after the retry budget raise JudgeUnavailable.
class RemoteJudge final : public Judge {
 public:
  RemoteJudge(Endpoint endpoint, RetryPolicy retry = {}, std::size_t max_in_flight = 8);

  std::string judge(const std::string& prompt) override;

 private:
  Endpoint endpoint_;
  RetryPolicy retry_;
  InFlightLimiter limiter_;
};

/// Memoizes replies by SHA-256 of the prompt. Concurrent readers, single
/// writer per insertion; a prompt is sent upstream at most once unless the
/// upstream call throws.
class CachingJudge final : public Judge {
 public:
  explicit CachingJudge(std::shared_ptr<Judge> upstream);

  std::string judge(const std::string& prompt) override;
  std::size_t upstream_calls() const;
  std::size_t cache_size() const;

 private:
  std::shared_ptr<Judge> upstream_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::string> cache_;
  std::size_t upstream_calls_ = 0;
  std::mutex call_mu_;
};

// ---------------------------------------------------------------------------
// Embedder

/// POST {url}/embed with batches of at most `batch_limit` texts.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(Endpoint endpoint, std::size_t dim, std::size_t batch_limit = 64, RetryPolicy retry = {});

  std::size_t dim() const override { return dim_; }
  Eigen::VectorXd embed(std::string_view text) const override;
  std::vector<Eigen::VectorXd> embed_batch(std::span<const std::string> texts) const override;
  std::string kind() const override { return "remote"; }

 private:
  std::vector<Eigen::VectorXd> embed_chunk(std::span<const std::string> texts) const;

  Endpoint endpoint_;
  std::size_t dim_;
  std::size_t batch_limit_;
  RetryPolicy retry_;
};

}  // namespace msr2
