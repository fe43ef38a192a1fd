#pragma once

// Sentencing-class evaluation: accuracy and macro precision / recall / F1
// over the ten interval classes. Unparsable predictions are always wrong.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msr2/reward.hpp"

namespace msr2 {

struct EvalRecord {
  std::string case_id;
  SentenceValue gold_months;
  /// nullopt for an unparsable or missing prediction.
  std::optional<SentenceValue> pred_months;
};

/// Rows: gold class; columns: predicted class, plus a last column for
/// predictions that did not parse or fell outside (0, 600].
struct ConfusionMatrix {
  static constexpr int kUnparsable = kNumSentenceClasses;
  std::array<std::array<long long, kNumSentenceClasses + 1>, kNumSentenceClasses> counts{};

  long long total() const;
};

ConfusionMatrix confusion_matrix(const std::vector<EvalRecord>& records, const IntervalTable& table);

struct ClassScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  long long support = 0;
};

struct MacroPRF {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::array<ClassScores, kNumSentenceClasses> per_class{};
};

/// Throws EmptyEval on no records.
double accuracy(const std::vector<EvalRecord>& records, const IntervalTable& table);

/// Per-class scores with 0 for 0/0, averaged over all ten classes.
MacroPRF macro_prf(const std::vector<EvalRecord>& records, const IntervalTable& table);

/// JSON lines with case_id, gold_months and pred_months (number, string or
/// null; strings go through the answer grammar). Duplicate case ids and
/// invalid gold values are ParseErrors naming the line.
std::vector<EvalRecord> read_predictions(std::istream& in);
std::vector<EvalRecord> read_predictions(const std::filesystem::path& path);

}  // namespace msr2
