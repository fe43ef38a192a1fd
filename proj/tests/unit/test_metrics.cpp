#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "msr2/error.hpp"
#include "msr2/metrics.hpp"
#include "oracles.hpp"

using namespace msr2;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an msr2::Error");
  return ErrorCode::IoError;
}

/// A month value inside each default class.
constexpr double kClassMidpoint[] = {3, 8, 10, 18, 30, 40, 55, 70, 100, 200};

EvalRecord rec(const std::string& id, int gold_class, std::optional<int> pred_class) {
  EvalRecord r{id, {kClassMidpoint[gold_class]}, std::nullopt};
  if (pred_class) r.pred_months = SentenceValue{kClassMidpoint[*pred_class]};
  return r;
}

oracle::Prf oracle_from(const ConfusionMatrix& m) {
  std::vector<std::vector<double>> sq(kNumSentenceClasses, std::vector<double>(kNumSentenceClasses));
  std::vector<double> unparsable(kNumSentenceClasses);
  for (int g = 0; g < kNumSentenceClasses; ++g) {
    for (int p = 0; p < kNumSentenceClasses; ++p) sq[g][p] = static_cast<double>(m.counts[g][p]);
    unparsable[g] = static_cast<double>(m.counts[g][ConfusionMatrix::kUnparsable]);
  }
  return oracle::macro_from_confusion(sq, unparsable);
}

}  // namespace

TEST_SUITE("eval_metrics") {
  TEST_CASE("accuracy") {
    const IntervalTable t;
    CHECK(accuracy({rec("a", 0, 0), rec("b", 5, 5)}, t) == 1.0);
    CHECK(accuracy({rec("a", 0, std::nullopt), rec("b", 5, std::nullopt)}, t) == 0.0);
    CHECK(accuracy(read_predictions(testing::fixture("predictions4.jsonl")), t) == 0.75);
    CHECK(code_of([&] { accuracy({}, t); }) == ErrorCode::EmptyEval);
    CHECK(code_of([&] { macro_prf({}, t); }) == ErrorCode::EmptyEval);
  }

  TEST_CASE("macro PRF, perfect predictions over all classes") {
    std::vector<EvalRecord> recs;
    for (int c = 0; c < kNumSentenceClasses; ++c) recs.push_back(rec("r" + std::to_string(c), c, c));
    const auto m = macro_prf(recs, IntervalTable());
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
  }

  TEST_CASE("macro PRF, single-class gold") {
    // Three gold class-4 cases, all correct: class 4 has P = R = F = 1, the
    // other nine classes contribute 0, so every macro value is 1/10.
    const auto m = macro_prf({rec("a", 4, 4), rec("b", 4, 4), rec("c", 4, 4)}, IntervalTable());
    CHECK(m.precision == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(m.recall == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(m.f1 == doctest::Approx(0.1).epsilon(1e-15));
  }

  TEST_CASE("macro PRF on the [[2,1],[0,3]] fixture") {
    // gold 0: predicted 0 twice and 1 once; gold 1: predicted 1 three times.
    const std::vector<EvalRecord> recs{rec("a", 0, 0), rec("b", 0, 0), rec("c", 0, 1),
                                       rec("d", 1, 1), rec("e", 1, 1), rec("f", 1, 1)};
    const auto cm = confusion_matrix(recs, IntervalTable());
    CHECK(cm.counts[0][0] == 2);
    CHECK(cm.counts[0][1] == 1);
    CHECK(cm.counts[1][1] == 3);
    CHECK(cm.total() == 6);
    const auto m = macro_prf(recs, IntervalTable());
    // Hand values: class 0 P=1 R=2/3 F=0.8; class 1 P=3/4 R=1 F=6/7.
    CHECK(std::abs(m.precision - (1.0 + 0.75) / 10) <= 1e-12);
    CHECK(std::abs(m.recall - (2.0 / 3 + 1.0) / 10) <= 1e-12);
    CHECK(std::abs(m.f1 - (0.8 + 6.0 / 7) / 10) <= 1e-12);
    const auto o = oracle_from(cm);
    CHECK(std::abs(m.precision - o.precision) <= 1e-12);
    CHECK(std::abs(m.recall - o.recall) <= 1e-12);
    CHECK(std::abs(m.f1 - o.f1) <= 1e-12);
  }

  TEST_CASE("random records: oracle agreement, permutation invariance, per-class harmonic mean") {
    std::mt19937 rng(21);
    const IntervalTable t;
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<EvalRecord> recs;
      const int n = 1 + static_cast<int>(rng() % 60);
      for (int i = 0; i < n; ++i) {
        const int g = static_cast<int>(rng() % 10);
        const int p = static_cast<int>(rng() % 11);
        recs.push_back(rec("r" + std::to_string(i), g, p == 10 ? std::nullopt : std::optional<int>(p)));
      }
      const auto m = macro_prf(recs, t);
      const auto o = oracle_from(confusion_matrix(recs, t));
      CHECK(std::abs(m.precision - o.precision) <= 1e-12);
      CHECK(std::abs(m.recall - o.recall) <= 1e-12);
      CHECK(std::abs(m.f1 - o.f1) <= 1e-12);
      for (const auto& c : m.per_class) {
        if (c.precision + c.recall > 0) {
          CHECK(std::abs(c.f1 - 2 * c.precision * c.recall / (c.precision + c.recall)) <= 1e-12);
        }
      }
      auto shuffled = recs;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      const auto ms = macro_prf(shuffled, t);
      CHECK(std::abs(ms.f1 - m.f1) <= 1e-12);
      CHECK(accuracy(shuffled, t) == accuracy(recs, t));
    }
  }

  TEST_CASE("prediction file parsing") {
    std::istringstream ok(
        "{\"case_id\":\"a\",\"gold_months\":12,\"pred_months\":null}\n"
        "\n"
        "{\"case_id\":\"b\",\"gold_months\":12,\"pred_months\":\"1 year\"}\n"
        "{\"case_id\":\"c\",\"gold_months\":12,\"pred_months\":\"no idea\"}\n");
    const auto recs = read_predictions(ok);
    REQUIRE(recs.size() == 3);
    CHECK_FALSE(recs[0].pred_months);
    CHECK(recs[1].pred_months->months == 12.0);
    CHECK_FALSE(recs[2].pred_months);

    std::istringstream dup("{\"case_id\":\"a\",\"gold_months\":1,\"pred_months\":1}\n"
                           "{\"case_id\":\"a\",\"gold_months\":1,\"pred_months\":1}\n");
    try {
      read_predictions(dup);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::istringstream bad_gold("{\"case_id\":\"a\",\"gold_months\":0,\"pred_months\":1}\n");
    CHECK(code_of([&] { read_predictions(bad_gold); }) == ErrorCode::ParseError);
  }
}
