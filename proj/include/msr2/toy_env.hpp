#pragma once

// Synthetic four-source routing task for exercising the full training loop
// with a ToyPolicy as the generator. Each case hinges on one factor; only
// the source that covers that factor holds the document stating the term.
//
// Turn 1 (policy): "<factors> F </factors> <search> <S> code F </S> </search>"
//   with F sampled from fact features and S sampled from the one-hot of F.
// Turn 2 (fixed reader): answers with the term found for the case code in
//   the evidence, or "unknown".

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "msr2/clients.hpp"
#include "msr2/grpo.hpp"
#include "msr2/retrieval.hpp"
#include "msr2/reward.hpp"
#include "msr2/rollout.hpp"

namespace msr2 {

inline constexpr int kToyFactors = 4;
inline constexpr std::array<std::string_view, kToyFactors> kToyFactorNames{"amount", "weapon", "recidivism",
                                                                           "confession"};
inline constexpr std::array<std::string_view, kToyFactors> kToySourceNames{"guideline", "statute", "precedent",
                                                                           "book"};

/// Symbol 0 stands for every forced token; 1..4 factors; 5..8 source tags.
inline constexpr Eigen::Index kToyVocab = 1 + 2 * kToyFactors;
/// [fact factor one-hot | chosen factor one-hot].
inline constexpr Eigen::Index kToyFeatures = 2 * kToyFactors;

struct ToyCase {
  std::string code;
  int key_factor = 0;
  double gold_months = 0;
  std::string fact;
};

class ToyRoutingTask {
 public:
  /// Deterministic in `seed`. Factors are balanced across cases.
  explicit ToyRoutingTask(std::uint64_t seed, int num_cases = 64);

  const std::vector<ToyCase>& cases() const { return cases_; }
  const SourceRegistry& registry() const { return *registry_; }
  const IntervalTable& table() const { return table_; }

  /// Factor one-hot for the keywords present in the fact text.
  Vec<double> fact_features(std::string_view fact) const;

 private:
  std::vector<ToyCase> cases_;
  std::shared_ptr<SourceRegistry> registry_;
  IntervalTable table_;
};

/// Scores 10 when every listed factor names a keyword present in the case
/// facts, else 0. Reads both from the rendered rubric prompt.
class KeywordJudge final : public Judge {
 public:
  std::string judge(const std::string& prompt) override;
};

/// One rollout session driven by a ToyPolicy; records a decision per
/// emitted token so the trajectory can be re-scored under new weights.
class ToyGenerator final : public Generator {
 public:
  ToyGenerator(const ToyRoutingTask& task, const ToyPolicy<double>& policy, std::uint64_t seed);

  GeneratorCapabilities capabilities() const override;
  GenerationResult generate(const GenerationRequest& request) override;

  const std::vector<ToyDecision<double>>& decisions() const { return decisions_; }

 private:
  const ToyRoutingTask& task_;
  const ToyPolicy<double>& policy_;
  std::mt19937_64 rng_;
  std::vector<ToyDecision<double>> decisions_;
};

struct ToyEpisode {
  Trajectory trajectory;
  ToyTrajectory<double> toy;
  RewardBreakdown reward;
};

/// Rolls out one case and scores it; the process score is always judged so
/// it can be logged even when lambda_r is 0.
ToyEpisode run_toy_episode(const ToyRoutingTask& task, const ToyCase& c, const ToyPolicy<double>& policy,
                           Judge& judge, double lambda_r, std::uint64_t seed, const RolloutConfig& rollout = {});

struct TrainToyConfig {
  int steps = 500;
  int facts_per_step = 4;
  double lambda_r = kDefaultLambdaR;
  std::uint64_t seed = 7;
  int num_cases = 64;
  /// G, eps_clip and beta keep their defaults; the step size is a toy value.
  GrpoConfig grpo{8, 1e-6, 0.2, 1e-3, 8.0};
  RolloutConfig rollout;

  void validate() const;
};

struct ToyStepMetrics {
  int step = 0;
  double mean_reward = 0;
  double mean_outcome = 0;
  double mean_process = 0;
  double objective = 0;
  double kl = 0;
  double clip_fraction = 0;
  double grad_norm = 0;
};

struct TrainToyResult {
  /// Row 0 is the untrained baseline; row s follows optimizer step s.
  std::vector<ToyStepMetrics> curve;
  Mat<double> initial_weights;
  Mat<double> final_weights;
};

using ToyStepCallback = std::function<void(const ToyStepMetrics&)>;

TrainToyResult train_toy(const TrainToyConfig& config, const ToyStepCallback& on_step = {});

struct ToyEvaluation {
  double mean_reward = 0;
  double mean_outcome = 0;
  double mean_process = 0;
};

/// Monte-Carlo estimate over `episodes` cases drawn round-robin.
ToyEvaluation evaluate_toy_policy(const ToyRoutingTask& task, const ToyPolicy<double>& policy, int episodes,
                                  double lambda_r, std::uint64_t seed);

/// Mean of mean_reward over the last `window` rows.
double trailing_mean_reward(const std::vector<ToyStepMetrics>& curve, std::size_t window);

/// Writes config.json, seeds.json, metrics.tsv and policy.json.
void write_toy_run(const std::filesystem::path& dir, const TrainToyConfig& config, const TrainToyResult& result);

std::string toy_metrics_header();
std::string toy_metrics_row(const ToyStepMetrics& m);

}  // namespace msr2
