#include "msr2/clients.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "msr2/digest.hpp"
#include "msr2/tag_protocol.hpp"

namespace msr2 {

TokenId mock_token_id(std::string_view piece) { return static_cast<TokenId>(fnv1a64(piece) & 0x7fffffffu); }

std::vector<TokenId> mock_token_ids(std::string_view text) {
  std::vector<TokenId> ids;
  for (const auto& piece : mock_tokenize(text)) ids.push_back(mock_token_id(piece));
  return ids;
}

std::chrono::milliseconds RetryPolicy::backoff_for(int attempt) const {
  auto delay = initial_backoff;
  for (int i = 1; i < attempt && delay < max_backoff; ++i) delay *= 2;
  return std::min(delay, max_backoff);
}

namespace {

std::optional<Endpoint> endpoint_from_env(const char* var) {
  const char* url = std::getenv(var);
  if (!url || !*url) return std::nullopt;
  Endpoint e;
  e.url = url;
  if (const char* t = std::getenv("MSR2_TIMEOUT_MS"); t && *t) e.timeout = std::chrono::milliseconds(std::atol(t));
  if (const char* tok = std::getenv("MSR2_API_TOKEN"); tok) e.bearer_token = tok;
  return e;
}

}  // namespace

ClientEnvironment ClientEnvironment::from_env() {
  return {endpoint_from_env("MSR2_GENERATOR_URL"), endpoint_from_env("MSR2_JUDGE_URL"),
          endpoint_from_env("MSR2_EMBEDDER_URL")};
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::EndOfSequence: return "eos";
  }
  return "eos";
}

bool apply_stop(std::string& text, const std::vector<std::string>& stop_tags) {
  std::size_t cut = std::string::npos;
  for (const auto& tag : stop_tags) {
    if (tag.empty()) continue;
    const auto at = text.find(tag);
    if (at != std::string::npos) cut = std::min(cut, at + tag.size());
  }
  if (cut == std::string::npos) return false;
  text.resize(cut);
  return true;
}

GenerationResult finalize_generation(std::string text, std::optional<std::vector<TokenId>> tokens,
                                     std::optional<std::vector<double>> logprobs, bool saw_eos,
                                     const GenerationRequest& request) {
  GenerationResult out;
  const bool stopped = apply_stop(text, request.stop_tags);
  out.finish = stopped ? FinishReason::Stop : (saw_eos ? FinishReason::EndOfSequence : FinishReason::Length);
  if (!tokens) {
    // Cap at max_new_tokens mock pieces, cutting the text after the last kept piece.
    const auto pieces = mock_tokenize(text);
    if (pieces.size() > request.max_new_tokens) {
      std::size_t pos = 0;
      for (std::size_t i = 0; i < request.max_new_tokens; ++i) pos = text.find(pieces[i], pos) + pieces[i].size();
      text.resize(pos);
      out.finish = FinishReason::Length;
    }
    out.tokens = mock_token_ids(text);
  } else {
    out.tokens = std::move(tokens);
  }
  out.text = std::move(text);
  out.logprobs = std::move(logprobs);
  return out;
}

ScriptedGenerator::ScriptedGenerator(std::vector<std::string> script) : script_(std::move(script)) {}

ScriptedGenerator::ScriptedGenerator(Rule rule) : rule_(std::move(rule)) {}

GeneratorCapabilities ScriptedGenerator::capabilities() const {
  GeneratorCapabilities caps;
  caps.supports_concurrent_sessions = true;
  return caps;
}

GenerationResult ScriptedGenerator::generate(const GenerationRequest& request) {
  std::string text;
  bool eos = true;
  if (rule_) {
    text = rule_(sha256_hex(request.context), request.context);
  } else if (turn_ < script_.size()) {
    text = script_[turn_];
  }
  ++turn_;
  return finalize_generation(std::move(text), std::nullopt, std::nullopt, eos, request);
}

ScriptedJudge::ScriptedJudge(std::string reply)
    : rule_([reply = std::move(reply)](const std::string&) { return reply; }) {}

ScriptedJudge::ScriptedJudge(std::function<std::string(const std::string&)> rule) : rule_(std::move(rule)) {}

std::string ScriptedJudge::judge(const std::string& prompt) {
  {
    std::lock_guard lock(mu_);
    ++calls_;
  }
  return rule_(prompt);
}

std::size_t ScriptedJudge::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

CachingJudge::CachingJudge(std::shared_ptr<Judge> upstream) : upstream_(std::move(upstream)) {}

std::string CachingJudge::judge(const std::string& prompt) {
  const auto key = sha256_hex(prompt);
  {
    std::shared_lock lock(mu_);
    if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  // Serialize misses so two threads asking the same prompt cost one call.
  std::lock_guard call_lock(call_mu_);
  {
    std::shared_lock lock(mu_);
    if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto reply = upstream_->judge(prompt);
  std::unique_lock lock(mu_);
  ++upstream_calls_;
  cache_.emplace(key, reply);
  return reply;
}

std::size_t CachingJudge::upstream_calls() const {
  std::shared_lock lock(mu_);
  return upstream_calls_;
}

std::size_t CachingJudge::cache_size() const {
  std::shared_lock lock(mu_);
  return cache_.size();
}

}  // namespace msr2
