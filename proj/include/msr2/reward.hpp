#pragma once

// Outcome reward (interval-class match), process reward (rubric judge over
// the extracted sentencing factors) and their mix R = (1 - l) O + l P.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msr2/clients.hpp"
#include "msr2/tag_protocol.hpp"

namespace msr2 {

inline constexpr int kNumSentenceClasses = 10;
inline constexpr double kMaxSentenceMonths = 600.0;
inline constexpr double kDefaultLambdaR = 0.2;

/// True for finite values in (0, 600] months.
bool is_valid_sentence(const SentenceValue& v);

/// Ten left-open, right-closed month intervals: (0,b0], (b0,b1], ..., (b8,inf).
class IntervalTable {
 public:
  /// Default breakpoints 6, 9, 12, 24, 36, 48, 60, 84, 120 months.
  IntervalTable();
  /// Throws InvalidConfig unless there are exactly 9 positive, strictly
  /// increasing upper bounds.
  explicit IntervalTable(std::vector<double> upper_bounds);

  /// {"boundaries": [...]} as JSON.
  static IntervalTable load(const std::filesystem::path& path);

  const std::vector<double>& upper_bounds() const { return bounds_; }
  int classify(double months) const;

 private:
  std::vector<double> bounds_;
};

int months_to_class(const SentenceValue& v, const IntervalTable& table);

/// 1 iff the prediction parsed, is a valid sentence and lands in the gold class.
int outcome_reward(const std::optional<SentenceValue>& pred, const SentenceValue& gold, const IntervalTable& table);

// ---------------------------------------------------------------------------
// Rubric judge

/// SHA-256 of the built-in rubric; any other template needs explicit opt-in.
inline constexpr std::string_view kPinnedRubricDigest =
    "95e57c32fecfba9d169c904d7b93d6669ca8ccc3364db10ce4be9ef16671ebb1";

class RubricTemplate {
 public:
  /// The pinned factor-scoring rubric with {fact} and {factors} placeholders.
  static RubricTemplate builtin();
  /// Throws RubricModified when the file's digest is not the pinned one and
  /// allow_modified is false.
  static RubricTemplate load(const std::filesystem::path& path, bool allow_modified = false);
  static RubricTemplate from_text(std::string text, bool allow_modified = false);

  const std::string& text() const { return text_; }
  const std::string& digest() const { return digest_; }
  bool is_pinned() const { return digest_ == kPinnedRubricDigest; }

  std::string render(std::string_view fact, const FactorList& factors) const;

 private:
  std::string text_;
  std::string digest_;
};

/// "1. a\n2. b" numbering used for the {factors} slot; "(none)" when empty.
std::string format_factor_list(const FactorList& factors);

/// Integer inside the last <answer>...</answer> of a judge reply, clamped to
/// [0, 10]; nullopt when there is none (a JudgeParseFailure).
std::optional<int> parse_judge_reply(std::string_view reply);

struct JudgeScore {
  int score = 0;
  bool parse_failure = false;
  std::string reply;
};

/// Renders the rubric, asks the judge, parses the score. Parse failures
/// score 0.
JudgeScore judge_factors(std::string_view fact, const FactorList& factors, Judge& judge,
                         const RubricTemplate& rubric = RubricTemplate::builtin());

double process_reward(int score);

double total_reward(int outcome, double process, double lambda_r = kDefaultLambdaR);

struct RewardBreakdown {
  int outcome_O = 0;
  double process_P = 0.0;
  double lambda_r = kDefaultLambdaR;
  double total_R = 0.0;
  /// Raw judge score per <factors> block.
  std::vector<int> judge_scores;
  int judge_parse_failures = 0;
  bool answered = false;
};

/// Scores one rollout. Every <factors> block is judged and the mean score is
/// normalized; a rollout with no <factors> block gets P = 0 without a judge
/// call. When lambda_r is 0 the judge is not consulted.
RewardBreakdown score_segments(std::string_view fact, const std::vector<Segment>& segments, const SentenceValue& gold,
                               const IntervalTable& table, Judge& judge, double lambda_r = kDefaultLambdaR,
                               const RubricTemplate& rubric = RubricTemplate::builtin());

// ---------------------------------------------------------------------------
// Judge agreement

struct RankCorrelation {
  double spearman_rho = 0.0;
  double kendall_tau = 0.0;
};

/// Tie-corrected Spearman rho (Pearson over mid-ranks) and Kendall tau-b.
/// Throws CorrelationUndefined on constant input and InvalidConfig on
/// length mismatch or fewer than two items.
RankCorrelation rank_correlations(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace msr2
