#pragma once

// Command-line application settings. Sources, lowest to highest precedence:
// built-in defaults, a JSON config file, MSR2_* environment variables, flags.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "msr2/clients.hpp"
#include "msr2/grpo.hpp"
#include "msr2/reward.hpp"
#include "msr2/rollout.hpp"

namespace msr2 {

struct AppConfig {
  std::filesystem::path registry_dir = "registry";
  /// Extra tag -> source aliases layered over registry.json.
  std::map<std::string, std::string> aliases;
  std::optional<std::filesystem::path> interval_table;
  std::optional<std::filesystem::path> rubric;
  bool allow_modified_rubric = false;
  RolloutConfig rollout;
  GrpoConfig grpo;
  double lambda_r = kDefaultLambdaR;
  /// Step size for train-toy; grpo.learning_rate is the full-scale default.
  double toy_learning_rate = 8.0;
  int toy_facts_per_step = 4;
  std::optional<Endpoint> generator;
  std::optional<Endpoint> judge;
  std::optional<Endpoint> embedder;
  std::uint64_t seed = 7;
  std::size_t jobs = 1;

  /// Keys (all optional): registry, aliases, interval_table, rubric,
  /// allow_modified_rubric, seed, jobs, rollout{budget, top_k,
  /// max_prompt_tokens, max_response_tokens}, grpo{group_size, eps_std,
  /// eps_clip, beta_kl, learning_rate, lambda_r}, toy{learning_rate,
  /// facts_per_step}, endpoints{generator, judge, embedder, timeout_ms}.
  /// Unknown keys and wrong types throw InvalidConfig naming the key.
  void merge_file(const std::filesystem::path& path);

  /// MSR2_REGISTRY, MSR2_SEED, MSR2_JOBS and the client endpoint variables.
  void merge_env();

  /// Throws InvalidConfig naming the offending key.
  void validate() const;
};

}  // namespace msr2
