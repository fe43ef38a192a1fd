// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Tolerances and sizes are fixed here; nothing is read from the environment.

#include "fixtures.hpp"
#include "grpo_instances.hpp"
#include "msr2/error.hpp"
#include "msr2/grpo.hpp"
#include "msr2/metrics.hpp"
#include "msr2/retrieval.hpp"
#include "msr2/reward.hpp"
#include "msr2/rollout.hpp"
#include "msr2/toy_env.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

using namespace msr2;
namespace fs = std::filesystem;
using testing::Rng;
using testing::uniform;
using testing::uniform_int;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 -------------------------------------------------------------------------
constexpr int kGradInstances = 120;
constexpr double kGradTol = 1e-5;
constexpr double kGradSeconds = 60;
constexpr double kKinkMargin = 1e-4;
constexpr double kFdStep = 1e-5;

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  GrpoConfig cfg;
  double worst = 0;
  int checked = 0, resampled = 0;
  while (checked < kGradInstances) {
    const int vocab = uniform_int(rng, 4, 32);
    const int features = uniform_int(rng, 2, 6);
    const auto inst = testing::random_toy_instance(rng, 8, vocab, features);
    if (testing::distance_to_kink(inst, cfg.eps_clip) < kKinkMargin) {
      ++resampled;
      continue;
    }
    const auto analytic = policy_grad(inst.policy, inst.old_policy, inst.ref_policy, inst.group, cfg);
    const auto numeric = testing::finite_difference_grad(inst, cfg, kFdStep);
    worst = std::max(worst, testing::max_relative_error(analytic, numeric));
    ++checked;
  }
  const double secs = seconds_since(t0);
  return {worst < kGradTol && secs < kGradSeconds,
          fmt("%d instances (G=8, vocab<=32), max rel err %.3g, %d near-kink resampled, %.1fs", checked, worst,
              resampled, secs)};
}

// 2 -------------------------------------------------------------------------
constexpr int kMaskTrials = 1000;

Outcome masking_exactness() {
  Rng rng(202);
  int failures = 0;
  for (int trial = 0; trial < kMaskTrials; ++trial) {
    auto g = testing::random_group_sample(rng, uniform_int(rng, 2, 12), trial % 2 == 0);
    GrpoConfig cfg;
    cfg.beta_kl = trial % 4 == 0 ? 0.0 : uniform(rng, 1e-4, 0.1);
    const double before = grpo_loss(g, cfg).objective;
    for (auto& tr : g.trajectories) {
      for (Eigen::Index t = 0; t < tr.logp_new.size(); ++t) {
        if (tr.gen_mask[t]) continue;
        tr.logp_new[t] = uniform(rng, -80, 80);
        tr.logp_old[t] = trial % 7 == 0 ? NAN : uniform(rng, -80, 80);
        tr.logp_ref[t] = trial % 11 == 0 ? -INFINITY : uniform(rng, -80, 80);
        if (tr.kl) (*tr.kl)[t] = uniform(rng, 0, 1e9);
      }
    }
    const double after = grpo_loss(g, cfg).objective;
    if (std::bit_cast<std::uint64_t>(before) != std::bit_cast<std::uint64_t>(after)) ++failures;
  }
  return {failures == 0, fmt("%d trials, %d objectives changed bitwise", kMaskTrials, failures)};
}

// 3 -------------------------------------------------------------------------
constexpr int kAdvantageGroups = 10000;
constexpr double kAdvantageTol = 1e-12;

Outcome advantage_normalization() {
  Rng rng(303);
  double worst_ratio = 0;
  for (int i = 0; i < kAdvantageGroups; ++i) {
    const int G = uniform_int(rng, 2, 64);
    Vec<double> r(G);
    for (int k = 0; k < G; ++k) r[k] = i % 3 == 0 ? static_cast<double>(uniform_int(rng, 0, 1)) : uniform(rng, 0, 1);
    if ((r.array() == r[0]).all()) r[0] = 1 - r[0];
    const auto a = group_advantages<double>(r, 1e-6);
    worst_ratio = std::max(worst_ratio, std::abs(a.sum()) / (kAdvantageTol * G));
  }
  bool degenerate_zero = true;
  for (int G = 2; G <= 64; ++G) {
    for (const double c : {0.0, 0.3, 1.0, 123.456}) {
      degenerate_zero &= group_advantages<double>(Vec<double>::Constant(G, c), 1e-6).isZero(0.0);
    }
  }
  return {worst_ratio <= 1.0 && degenerate_zero,
          fmt("%d groups, max |sum A| = %.3g x (1e-12 G); all-equal groups zero: %s", kAdvantageGroups, worst_ratio,
              degenerate_zero ? "yes" : "no")};
}

// 4 -------------------------------------------------------------------------
constexpr int kOracleInstances = 1000;
constexpr double kOracleTol = 1e-10;

Outcome naive_oracle() {
  Rng rng(404);
  double worst = 0;
  for (int i = 0; i < kOracleInstances; ++i) {
    GrpoConfig cfg;
    cfg.beta_kl = i % 3 == 0 ? 0.0 : uniform(rng, 1e-4, 0.05);
    cfg.eps_clip = uniform(rng, 0.05, 0.4);
    const auto g = testing::random_group_sample(rng, uniform_int(rng, 2, 16), i % 2 == 0);
    const double expect =
        oracle::grpo_objective(testing::rewards_of(g), testing::to_naive(g), cfg.eps_std, cfg.eps_clip, cfg.beta_kl);
    worst = std::max(worst, std::abs(grpo_loss(g, cfg).objective - expect));
  }
  return {worst <= kOracleTol, fmt("%d instances, max |diff| %.3g", kOracleInstances, worst)};
}

// 5 -------------------------------------------------------------------------
constexpr double kBm25Tol = 1e-9;

Outcome bm25_oracle() {
  const auto recs = read_corpus_jsonl(testing::fixture("corpus50.jsonl"));
  const auto queries = testing::read_lines(testing::fixture("queries20.txt"));
  const auto src = IndexedSource::build("docs", IndexStrategy::Lexical, recs, nullptr);
  std::vector<std::pair<std::string, std::vector<std::string>>> docs;
  for (const auto& r : recs) docs.emplace_back(r.doc_id, oracle::ascii_terms(r.text));
  double worst = 0;
  int order_mismatch = 0;
  std::size_t scored = 0;
  for (const auto& q : queries) {
    const auto expect = oracle::bm25(docs, oracle::ascii_terms(q));
    const auto got = bm25_search(*src, q, recs.size());
    if (got.size() != expect.size()) {
      ++order_mismatch;
      continue;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].doc_id != expect[i].doc_id) ++order_mismatch;
      worst = std::max(worst, std::abs(got[i].score - expect[i].score));
    }
    scored += got.size();
  }
  return {recs.size() == 50 && queries.size() == 20 && order_mismatch == 0 && worst <= kBm25Tol,
          fmt("%zu docs x %zu queries, %zu scored hits, max |diff| %.3g, %d order mismatches", recs.size(),
              queries.size(), scored, worst, order_mismatch)};
}

// 6 -------------------------------------------------------------------------
constexpr std::size_t kDenseN = 5000;
constexpr Eigen::Index kDenseDim = 64;
constexpr int kExactQueries = 50;
constexpr int kRecallQueries = 200;
constexpr double kRecallMin = 0.95;
constexpr double kDenseSeconds = 120;

Outcome dense_search_check() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(606);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd cols(kDenseDim, static_cast<Eigen::Index>(kDenseN));
  std::vector<std::vector<double>> raw(kDenseN, std::vector<double>(kDenseDim));
  for (std::size_t j = 0; j < kDenseN; ++j)
    for (Eigen::Index i = 0; i < kDenseDim; ++i) cols(i, static_cast<Eigen::Index>(j)) = raw[j][i] = n01(rng);
  std::vector<CorpusRecord> recs(kDenseN);
  for (std::size_t j = 0; j < kDenseN; ++j) recs[j] = {fmt("v%05zu", j), "x", {}};

  RetrievalParams params;
  params.approx_threshold = 0;  // force the graph at this size
  const auto embedder = std::make_shared<HashingEmbedder>(static_cast<std::size_t>(kDenseDim));
  const auto exact_src = IndexedSource::assemble("exact", IndexStrategy::DenseExact, recs, std::nullopt, cols,
                                                 embedder, params);
  const auto approx_src = IndexedSource::assemble("approx", IndexStrategy::DenseApprox, recs, std::nullopt, cols,
                                                  embedder, params);
  if (!approx_src->has_graph()) return {false, "approximate source built without a graph"};

  int exact_mismatch = 0;
  for (int q = 0; q < kExactQueries; ++q) {
    std::vector<double> qv(kDenseDim);
    Eigen::VectorXd qe(kDenseDim);
    for (Eigen::Index i = 0; i < kDenseDim; ++i) qe[i] = qv[i] = n01(rng);
    const auto expect = oracle::cosine_top_k(raw, qv, 10);
    const auto got = dense_search(*exact_src, qe, 10, DenseMode::Exact);
    for (std::size_t i = 0; i < 10; ++i) {
      if (got.size() != 10 || got[i].doc_id != recs[expect[i].first].doc_id ||
          std::abs(got[i].score - expect[i].second) > 1e-12) {
        ++exact_mismatch;
      }
    }
  }

  std::size_t hits = 0;
  for (int q = 0; q < kRecallQueries; ++q) {
    Eigen::VectorXd qe(kDenseDim);
    for (Eigen::Index i = 0; i < kDenseDim; ++i) qe[i] = n01(rng);
    const auto truth = dense_search(*exact_src, qe, 10, DenseMode::Exact);
    const auto approx = dense_search(*approx_src, qe, 10, DenseMode::Approx);
    for (const auto& e : approx) {
      hits += std::any_of(truth.begin(), truth.end(), [&](const Evidence& t) { return t.doc_id == e.doc_id; });
    }
  }
  const double recall = static_cast<double>(hits) / (10.0 * kRecallQueries);
  const double secs = seconds_since(t0);
  return {exact_mismatch == 0 && recall >= kRecallMin && secs < kDenseSeconds,
          fmt("%zu x %td vectors: exact mismatches %d/%d ranks, recall@10 %.4f, %.1fs", kDenseN, kDenseDim,
              exact_mismatch, kExactQueries * 10, recall, secs)};
}

// 7 -------------------------------------------------------------------------
Outcome golden_replay() {
  const auto reg = testing::fixture_registry();
  std::string detail;
  bool ok = true;
  for (const std::string name : {"answer_first", "search_then_answer", "never_valid"}) {
    ScriptedGenerator gen(testing::fixture_script(name));
    const auto t = run_rollout(testing::fixture_fact(), gen, *reg);
    const bool same = trajectory_to_json_line(t) + "\n" == testing::slurp(testing::golden(name + ".trace"));
    ok &= same;
    detail += name + (same ? " identical; " : " DIFFERS; ");
    if (name == "never_valid") {
      const bool rethink = std::any_of(t.segments.begin(), t.segments.end(), [](const Segment& s) {
        return s.kind == SegmentKind::Rethink && s.text == "My action is not correct. Let me rethink.";
      });
      const bool budget = t.budget_used == 8 && t.terminal == Terminal::BudgetExhausted;
      ok &= rethink && budget;
      detail += fmt("never_valid budget_used=%d, rethink text %s", t.budget_used, rethink ? "present" : "missing");
    }
  }
  return {ok, detail};
}

// 8 -------------------------------------------------------------------------
constexpr int kGridSteps = 20;  // 0.05 resolution

Outcome reward_algebra() {
  int violations = 0, points = 0;
  for (int li = 0; li <= kGridSteps; ++li) {
    const double l = li / static_cast<double>(kGridSteps);
    for (int o = 0; o <= 1; ++o) {
      double prev = -1;
      for (int pi = 0; pi <= kGridSteps; ++pi) {
        const double p = pi / static_cast<double>(kGridSteps);
        const double r = total_reward(o, p, l);
        ++points;
        if (!(r >= 0.0 && r <= 1.0)) ++violations;
        if (r < prev) ++violations;  // nondecreasing in P
        prev = r;
        if (o == 0 && r > total_reward(1, p, l)) ++violations;  // nondecreasing in O
        if (std::abs(r - ((1 - l) * o + l * p)) > 1e-15) ++violations;
        if (li == 0 && r != static_cast<double>(o)) ++violations;
        if (li == kGridSteps && r != p) ++violations;
      }
    }
  }
  const double example = total_reward(1, 0.8);
  if (std::abs(example - 0.96) > 1e-12) ++violations;
  if (total_reward(1, 1.0) != 1.0 || total_reward(0, 0.0) != 0.0) ++violations;
  return {violations == 0,
          fmt("%d grid points (O x P x lambda), %d violations, default R(1, 0.8) = %.15g", points, violations,
              example)};
}

// 9 -------------------------------------------------------------------------
constexpr int kUniformEpisodes = 1000;
constexpr double kUniformTarget = 0.25, kUniformTol = 0.05;
constexpr double kTrainTarget = 0.9;
constexpr std::size_t kTrailing = 10;
constexpr int kTrainSteps = 500;
constexpr double kTrainSeconds = 600;
const std::vector<std::uint64_t> kToySeeds{7, 1, 2, 3, 4};

/// First step whose trailing window of `field` reaches the target.
std::optional<int> first_reaching(const std::vector<ToyStepMetrics>& curve, double ToyStepMetrics::*field) {
  for (std::size_t i = kTrailing; i <= curve.size(); ++i) {
    double s = 0;
    for (std::size_t k = i - kTrailing; k < i; ++k) s += curve[k].*field;
    if (s / kTrailing >= kTrainTarget) return curve[i - 1].step;
  }
  return std::nullopt;
}

double mean_of(const std::vector<ToyStepMetrics>& curve, double ToyStepMetrics::*field) {
  double s = 0;
  for (const auto& m : curve) s += m.*field;
  return s / static_cast<double>(curve.size());
}

Outcome toy_learning(const fs::path& out) {
  const ToyRoutingTask task(7);
  const auto uniform_eval =
      evaluate_toy_policy(task, ToyPolicy<double>(kToyVocab, kToyFeatures), kUniformEpisodes, kDefaultLambdaR, 99);
  const bool uniform_ok = std::abs(uniform_eval.mean_reward - kUniformTarget) <= kUniformTol;

  bool all_reach = true, slower_everywhere = true;
  double worst_secs = 0, steps_with = 0, steps_without = 0, auc_with = 0, auc_without = 0;
  std::string per_seed;
  for (const auto seed : kToySeeds) {
    std::optional<int> reach_with, outcome_with, outcome_without;
    for (const double lambda : {kDefaultLambdaR, 0.0}) {
      TrainToyConfig cfg;
      cfg.steps = kTrainSteps;
      cfg.seed = seed;
      cfg.lambda_r = lambda;
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = train_toy(cfg);
      worst_secs = std::max(worst_secs, seconds_since(t0));
      write_toy_run(out / fmt("toy_lambda%.1f_seed%llu", lambda, static_cast<unsigned long long>(seed)), cfg,
                    result);
      // Outcome accuracy is the common yardstick: total reward means
      // different things under the two weightings.
      const auto reach_outcome = first_reaching(result.curve, &ToyStepMetrics::mean_outcome);
      const int steps = reach_outcome.value_or(kTrainSteps + 1);
      if (lambda > 0) {
        reach_with = first_reaching(result.curve, &ToyStepMetrics::mean_reward);
        outcome_with = reach_outcome;
        steps_with += steps;
        auc_with += mean_of(result.curve, &ToyStepMetrics::mean_outcome);
      } else {
        outcome_without = reach_outcome;
        steps_without += steps;
        auc_without += mean_of(result.curve, &ToyStepMetrics::mean_outcome);
      }
    }
    all_reach &= reach_with.has_value();
    slower_everywhere &= outcome_without.value_or(kTrainSteps + 1) > outcome_with.value_or(kTrainSteps + 1);
    per_seed += fmt(" seed %llu: %d vs %d;", static_cast<unsigned long long>(seed), outcome_with.value_or(-1),
                    outcome_without.value_or(-1));
  }
  const double n = static_cast<double>(kToySeeds.size());
  const bool ablation_slower = steps_without > steps_with && auc_without < auc_with;
  const bool ok = uniform_ok && all_reach && ablation_slower && worst_secs < kTrainSeconds;
  return {ok, fmt("uniform policy %.4f over %d episodes; lambda 0.2 reaches trailing-%zu reward >= 0.9 on all "
                  "seeds: %s; mean steps to outcome >= 0.9: %.1f (lambda 0.2) vs %.1f (lambda 0); mean outcome "
                  "over run %.3f vs %.3f; slowest run %.1fs; per seed",
                  uniform_eval.mean_reward, kUniformEpisodes, kTrailing, all_reach ? "yes" : "no", steps_with / n,
                  steps_without / n, auc_with / n, auc_without / n, worst_secs) +
                  per_seed + (slower_everywhere ? " (slower on every seed)" : "") + "; curves in " + out.string()};
}

// 10 ------------------------------------------------------------------------
constexpr double kMetricTol = 1e-12;

Outcome metrics_cross_check() {
  const IntervalTable table;
  std::vector<std::vector<EvalRecord>> sets{read_predictions(testing::fixture("predictions4.jsonl"))};
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> months(0.5, 300);
  for (int s = 0; s < 50; ++s) {
    std::vector<EvalRecord> recs;
    for (int i = 0; i < 200; ++i) {
      EvalRecord r{fmt("r%d", i), {months(rng)}, std::nullopt};
      if (rng() % 5) r.pred_months = SentenceValue{rng() % 2 ? r.gold_months.months * (0.8 + 0.4 * (rng() % 100) / 100.0)
                                                             : months(rng)};
      recs.push_back(r);
    }
    sets.push_back(std::move(recs));
  }
  double worst = 0;
  for (const auto& recs : sets) {
    double sum = 0;
    for (const auto& r : recs) sum += outcome_reward(r.pred_months, r.gold_months, table);
    worst = std::max(worst, std::abs(accuracy(recs, table) - sum / static_cast<double>(recs.size())));
  }
  // gold 0 -> {0, 0, 1}, gold 1 -> {1, 1, 1}: confusion [[2,1],[0,3]].
  const auto at = [](int cls) { return SentenceValue{std::vector<double>{3, 8}[static_cast<std::size_t>(cls)]}; };
  std::vector<EvalRecord> fixture;
  const int rows[][2] = {{0, 0}, {0, 0}, {0, 1}, {1, 1}, {1, 1}, {1, 1}};
  for (const auto& [g, p] : rows) fixture.push_back({fmt("f%zu", fixture.size()), at(g), at(p)});
  const auto m = macro_prf(fixture, table);
  const double hand_p = (1.0 + 0.75) / 10, hand_r = (2.0 / 3 + 1.0) / 10, hand_f = (0.8 + 6.0 / 7) / 10;
  const double prf_err =
      std::max({std::abs(m.precision - hand_p), std::abs(m.recall - hand_r), std::abs(m.f1 - hand_f)});
  const double acc4 = accuracy(sets[0], table);
  return {worst <= kMetricTol && prf_err <= kMetricTol && acc4 == 0.75,
          fmt("%zu prediction sets, max |accuracy - mean O| %.3g; fixture accuracy %.2f; macro P/R/F %.6f/%.6f/%.6f "
              "(hand err %.3g)",
              sets.size(), worst, acc4, m.precision, m.recall, m.f1, prf_err)};
}

// 11 ------------------------------------------------------------------------
/// Facts and listed factors as a mock judge reads them from the rubric.
std::pair<std::string, std::vector<std::string>> read_rubric_prompt(const std::string& prompt) {
  const auto facts_at = prompt.rfind("Case Facts: ");
  const auto factors_at = prompt.rfind("\nSentencing Factors: ");
  if (facts_at == std::string::npos || factors_at == std::string::npos) return {};
  std::vector<std::string> items;
  std::istringstream lines(prompt.substr(factors_at + 21));
  std::string line;
  while (std::getline(lines, line)) {
    const auto dot = line.find(". ");
    if (dot != std::string::npos && dot > 0 && std::isdigit(static_cast<unsigned char>(line[0]))) {
      items.push_back(line.substr(dot + 2));
    }
  }
  return {prompt.substr(facts_at + 12, factors_at - facts_at - 12), items};
}

int supported(const std::string& fact, const std::vector<std::string>& items) {
  return static_cast<int>(std::count_if(items.begin(), items.end(), [&](const std::string& f) {
    return fact.find(f) != std::string::npos;
  }));
}

std::string reply(int score) { return "<answer>" + std::to_string(std::clamp(score, 0, 10)) + "</answer>"; }

Outcome rank_agreement() {
  const auto fixture = rank_correlations({1, 2, 3, 4, 5}, {1, 3, 2, 5, 4});
  const bool fixture_ok = std::abs(fixture.spearman_rho - 0.8) <= 1e-12 && std::abs(fixture.kendall_tau - 0.6) <= 1e-12;

  // Three mock judges with different scoring habits over the same items.
  ScriptedJudge precise([](const std::string& p) {
    const auto [fact, items] = read_rubric_prompt(p);
    return reply(items.empty() ? 0 : 10 * supported(fact, items) / static_cast<int>(items.size()));
  });
  ScriptedJudge lenient([](const std::string& p) {
    const auto [fact, items] = read_rubric_prompt(p);
    return reply(4 * supported(fact, items) + static_cast<int>(items.size()));
  });
  ScriptedJudge noisy([](const std::string& p) {
    const auto [fact, items] = read_rubric_prompt(p);
    const int base = items.empty() ? 0 : 10 * supported(fact, items) / static_cast<int>(items.size());
    return reply(base + static_cast<int>(std::hash<std::string>{}(p) % 5) - 2);
  });
  const ToyRoutingTask task(11);
  std::mt19937_64 rng(1111);
  std::vector<int> a, b, c;
  for (const auto& tc : task.cases()) {
    FactorList factors;
    for (int f = 0; f < kToyFactors; ++f) {
      if (rng() % 3 == 0 || (f == tc.key_factor && rng() % 2)) factors.factors.emplace_back(kToyFactorNames[f]);
    }
    a.push_back(judge_factors(tc.fact, factors, precise).score);
    b.push_back(judge_factors(tc.fact, factors, lenient).score);
    c.push_back(judge_factors(tc.fact, factors, noisy).score);
  }
  const auto ab = rank_correlations(a, b), ac = rank_correlations(a, c), bc = rank_correlations(b, c);
  bool pairs_ok = true;
  for (const auto& r : {ab, ac, bc}) {
    pairs_ok &= std::isfinite(r.spearman_rho) && std::isfinite(r.kendall_tau) && std::abs(r.spearman_rho) <= 1 &&
                std::abs(r.kendall_tau) <= 1;
  }
  return {fixture_ok && pairs_ok,
          fmt("fixture rho=%.12g tau=%.12g; %zu items: precise/lenient rho=%.3f tau=%.3f, precise/noisy rho=%.3f "
              "tau=%.3f, lenient/noisy rho=%.3f tau=%.3f",
              fixture.spearman_rho, fixture.kendall_tau, a.size(), ab.spearman_rho, ab.kendall_tau, ac.spearman_rho,
              ac.kendall_tau, bc.spearman_rho, bc.kendall_tau)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string out = "acceptance_out";
  app.add_option("--out", out, "Directory for archived training curves");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"grpo gradient check", gradient_check},
      {"environment-token masking", masking_exactness},
      {"advantage normalization", advantage_normalization},
      {"objective vs naive oracle", naive_oracle},
      {"bm25 vs brute-force oracle", bm25_oracle},
      {"dense search exact and approximate", dense_search_check},
      {"rollout golden traces", golden_replay},
      {"reward algebra grid", reward_algebra},
      {"toy end-to-end learning", [&] { return toy_learning(out); }},
      {"metrics cross-check", metrics_cross_check},
      {"rank correlations and mock judges", rank_agreement},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    failed += !r.pass;
    std::printf("%s %2zu %s: %s\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
