#include "msr2/toy_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

#include "json.hpp"

namespace msr2 {

namespace {

constexpr std::array<std::string_view, kToyFactors> kFactPhrases{
    "the stolen amount was large", "a weapon was carried", "the record shows recidivism",
    "the defendant made a full confession"};

// Month range per interval class for sampling gold terms.
constexpr std::array<int, 11> kClassEdges{0, 6, 9, 12, 24, 36, 48, 60, 84, 120, 180};

constexpr int kForcedSymbol = 0;
int factor_symbol(int f) { return 1 + f; }
int source_symbol(int s) { return 1 + kToyFactors + s; }

std::vector<int> factor_symbols() {
  std::vector<int> v;
  for (int f = 0; f < kToyFactors; ++f) v.push_back(factor_symbol(f));
  return v;
}

std::vector<int> source_symbols() {
  std::vector<int> v;
  for (int s = 0; s < kToyFactors; ++s) v.push_back(source_symbol(s));
  return v;
}

ToyDecision<double> forced() { return {Vec<double>::Zero(kToyFeatures), {kForcedSymbol}, kForcedSymbol}; }

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::optional<std::string> case_code(const std::string& context) {
  static const std::regex kCode(R"(^Case (c\d+):)");
  std::smatch m;
  if (!std::regex_search(context, m, kCode)) return std::nullopt;
  return m[1].str();
}

}  // namespace

ToyRoutingTask::ToyRoutingTask(std::uint64_t seed, int num_cases) : registry_(std::make_shared<SourceRegistry>()) {
  if (num_cases < kToyFactors) throw Error(ErrorCode::InvalidConfig, "toy task needs at least 4 cases");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cls(0, 9);
  for (int i = 0; i < num_cases; ++i) {
    ToyCase c;
    c.code = "c" + std::to_string(i + 1);
    c.key_factor = i % kToyFactors;
    const int k = cls(rng);
    std::uniform_int_distribution<int> month(kClassEdges[k] + 1, kClassEdges[k + 1]);
    c.gold_months = month(rng);
    c.fact = "Case " + c.code + ": " + std::string(kFactPhrases[c.key_factor]) + ".";
    cases_.push_back(std::move(c));
  }
  std::shuffle(cases_.begin(), cases_.end(), rng);

  for (int s = 0; s < kToyFactors; ++s) {
    std::vector<CorpusRecord> records;
    for (const auto& c : cases_) {
      const std::string head = c.code + " " + std::string(kToyFactorNames[s]) + " " + std::string(kToySourceNames[s]);
      const std::string body = c.key_factor == s ? ": term " + format_months(c.gold_months) + " months"
                                                 : ": no provision applies";
      records.push_back({c.code + "-" + std::string(kToySourceNames[s]), head + body, {}});
    }
    const std::string id(kToySourceNames[s]);
    registry_->add(IndexedSource::build(id, IndexStrategy::Lexical, std::move(records), nullptr));
    registry_->add_alias(id, id);
  }
}

Vec<double> ToyRoutingTask::fact_features(std::string_view fact) const {
  Vec<double> phi = Vec<double>::Zero(kToyFeatures);
  for (int f = 0; f < kToyFactors; ++f) {
    if (fact.find(kToyFactorNames[f]) != std::string_view::npos) phi[f] = 1.0;
  }
  return phi;
}

std::string KeywordJudge::judge(const std::string& prompt) {
  const auto facts_at = prompt.rfind("Case Facts: ");
  const auto factors_at = prompt.rfind("\nSentencing Factors: ");
  if (facts_at == std::string::npos || factors_at == std::string::npos || factors_at < facts_at) {
    return "cannot score";
  }
  const std::string fact = prompt.substr(facts_at + 12, factors_at - facts_at - 12);
  std::istringstream lines(prompt.substr(factors_at + 21));
  std::string line;
  int listed = 0;
  bool all_supported = true;
  static const std::regex kItem(R"(^\s*\d+\.\s*(\S.*?)\s*$)");
  while (std::getline(lines, line)) {
    std::smatch m;
    if (!std::regex_match(line, m, kItem)) continue;
    ++listed;
    const auto item = m[1].str();
    const bool known = std::find(kToyFactorNames.begin(), kToyFactorNames.end(), item) != kToyFactorNames.end();
    if (!known || fact.find(item) == std::string::npos) all_supported = false;
  }
  return std::string("<answer>") + (listed > 0 && all_supported ? "10" : "0") + "</answer>";
}

ToyGenerator::ToyGenerator(const ToyRoutingTask& task, const ToyPolicy<double>& policy, std::uint64_t seed)
    : task_(task), policy_(policy), rng_(seed) {}

GeneratorCapabilities ToyGenerator::capabilities() const {
  GeneratorCapabilities caps;
  caps.supports_logprobs = true;
  return caps;
}

GenerationResult ToyGenerator::generate(const GenerationRequest& request) {
  const auto code = case_code(request.context);
  if (!code) throw Error(ErrorCode::ProtocolError, "toy context does not start with a case header");
  std::vector<std::string> words;
  std::vector<double> logprobs;
  const auto emit_forced = [&](std::string w) {
    words.push_back(std::move(w));
    decisions_.push_back(forced());
    logprobs.push_back(0.0);
  };

  if (request.context.find("<information>") == std::string::npos) {
    const auto fact_end = request.context.find('\n');
    const Vec<double> phi = task_.fact_features(std::string_view(request.context).substr(0, fact_end));
    const auto factor_allowed = factor_symbols();
    const int f_sym = policy_.sample(phi, factor_allowed, rng_);
    const int f = f_sym - 1;
    Vec<double> route_phi = Vec<double>::Zero(kToyFeatures);
    route_phi[kToyFactors + f] = 1.0;
    const auto route_allowed = source_symbols();
    const int s_sym = policy_.sample(route_phi, route_allowed, rng_);
    const int s = s_sym - 1 - kToyFactors;
    const std::string factor(kToyFactorNames[f]);
    const std::string source(kToySourceNames[s]);

    emit_forced("<factors>");
    ToyDecision<double> fd{phi, factor_allowed, f_sym};
    words.push_back(factor);
    logprobs.push_back(policy_.log_prob(fd));
    decisions_.push_back(std::move(fd));
    emit_forced("</factors>");
    emit_forced("<search>");
    ToyDecision<double> sd{route_phi, route_allowed, s_sym};
    words.push_back("<" + source + ">");
    logprobs.push_back(policy_.log_prob(sd));
    decisions_.push_back(std::move(sd));
    emit_forced(*code);
    emit_forced(factor);
    emit_forced("</" + source + ">");
    emit_forced("</search>");
  } else {
    // Reader: the term stated for this case code, if any evidence has it.
    const std::regex term(*code + R"(\b[^\n]*?term (\d+(?:\.\d+)?) months)");
    std::smatch m;
    emit_forced("<answer>");
    emit_forced(std::regex_search(request.context, m, term) ? m[1].str() : "unknown");
    emit_forced("</answer>");
  }
  auto text = join(words);
  auto ids = mock_token_ids(text);
  return finalize_generation(std::move(text), std::move(ids), std::move(logprobs), true, request);
}

ToyEpisode run_toy_episode(const ToyRoutingTask& task, const ToyCase& c, const ToyPolicy<double>& policy,
                           Judge& judge, double lambda_r, std::uint64_t seed, const RolloutConfig& rollout) {
  ToyGenerator gen(task, policy, seed);
  ToyEpisode ep;
  ep.trajectory = run_rollout(c.fact, gen, task.registry(), rollout);
  const auto& decisions = gen.decisions();
  std::size_t next = 0;
  for (const auto origin : ep.trajectory.origin_mask) {
    if (origin == Origin::Environment) {
      ep.toy.tokens.emplace_back(std::nullopt);
    } else {
      if (next >= decisions.size()) throw Error(ErrorCode::ProtocolError, "more generated tokens than decisions");
      ep.toy.tokens.emplace_back(decisions[next++]);
    }
  }
  if (next != decisions.size()) throw Error(ErrorCode::ProtocolError, "generated tokens and decisions disagree");
  const auto scored = score_segments(c.fact, ep.trajectory.segments, {c.gold_months}, task.table(), judge, 1.0);
  ep.reward = scored;
  ep.reward.lambda_r = lambda_r;
  ep.reward.total_R = total_reward(scored.outcome_O, scored.process_P, lambda_r);
  ep.toy.reward = ep.reward.total_R;
  return ep;
}

void TrainToyConfig::validate() const {
  if (steps < 0) throw Error(ErrorCode::InvalidConfig, "steps must be non-negative");
  if (facts_per_step <= 0) throw Error(ErrorCode::InvalidConfig, "facts_per_step must be positive");
  if (!(lambda_r >= 0 && lambda_r <= 1)) throw Error(ErrorCode::InvalidConfig, "lambda_r must lie in [0, 1]");
  grpo.validate();
  rollout.validate();
}

namespace {

struct SampledBatch {
  std::vector<std::vector<ToyTrajectory<double>>> groups;
  ToyStepMetrics metrics;
};

SampledBatch sample_batch(const ToyRoutingTask& task, const ToyPolicy<double>& policy, Judge& judge,
                          const TrainToyConfig& config, std::mt19937_64& rng) {
  SampledBatch batch;
  std::uniform_int_distribution<std::size_t> pick(0, task.cases().size() - 1);
  double reward = 0, outcome = 0, process = 0;
  int episodes = 0;
  for (int f = 0; f < config.facts_per_step; ++f) {
    const auto& c = task.cases()[pick(rng)];
    std::vector<ToyTrajectory<double>> group;
    for (int g = 0; g < config.grpo.group_size_G; ++g) {
      auto ep = run_toy_episode(task, c, policy, judge, config.lambda_r, rng(), config.rollout);
      reward += ep.reward.total_R;
      outcome += ep.reward.outcome_O;
      process += ep.reward.process_P;
      ++episodes;
      group.push_back(std::move(ep.toy));
    }
    batch.groups.push_back(std::move(group));
  }
  batch.metrics.mean_reward = reward / episodes;
  batch.metrics.mean_outcome = outcome / episodes;
  batch.metrics.mean_process = process / episodes;
  return batch;
}

}  // namespace

TrainToyResult train_toy(const TrainToyConfig& config, const ToyStepCallback& on_step) {
  config.validate();
  const ToyRoutingTask task(config.seed, config.num_cases);
  ToyPolicy<double> policy(kToyVocab, kToyFeatures);
  const ToyPolicy<double> ref = policy;
  CachingJudge judge(std::make_shared<KeywordJudge>());
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainToyResult result;
  result.initial_weights = policy.weights();
  for (int step = 0; step <= config.steps; ++step) {
    auto batch = sample_batch(task, policy, judge, config, rng);
    auto& m = batch.metrics;
    m.step = step;
    const ToyPolicy<double> old = policy;
    Mat<double> grad = Mat<double>::Zero(policy.vocab(), policy.feature_dim());
    for (const auto& group : batch.groups) {
      const auto loss = grpo_loss(toy_group_sample(policy, old, ref, group), config.grpo);
      m.objective += loss.objective / static_cast<double>(batch.groups.size());
      m.kl += loss.diagnostics.mean_kl / static_cast<double>(batch.groups.size());
      m.clip_fraction += loss.diagnostics.clip_fraction / static_cast<double>(batch.groups.size());
      if (step > 0) grad += policy_grad(policy, old, ref, group, config.grpo);
    }
    if (step > 0) {
      grad /= static_cast<double>(batch.groups.size());
      m.grad_norm = grad.norm();
      apply_gradient(policy, grad, config.grpo.learning_rate);
    }
    if (on_step) on_step(m);
    result.curve.push_back(m);
  }
  result.final_weights = policy.weights();
  return result;
}

ToyEvaluation evaluate_toy_policy(const ToyRoutingTask& task, const ToyPolicy<double>& policy, int episodes,
                                  double lambda_r, std::uint64_t seed) {
  if (episodes <= 0) throw Error(ErrorCode::InvalidConfig, "episodes must be positive");
  KeywordJudge judge;
  std::mt19937_64 rng(seed);
  ToyEvaluation ev;
  for (int e = 0; e < episodes; ++e) {
    const auto& c = task.cases()[static_cast<std::size_t>(e) % task.cases().size()];
    const auto ep = run_toy_episode(task, c, policy, judge, lambda_r, rng());
    ev.mean_reward += ep.reward.total_R;
    ev.mean_outcome += ep.reward.outcome_O;
    ev.mean_process += ep.reward.process_P;
  }
  ev.mean_reward /= episodes;
  ev.mean_outcome /= episodes;
  ev.mean_process /= episodes;
  return ev;
}

double trailing_mean_reward(const std::vector<ToyStepMetrics>& curve, std::size_t window) {
  if (curve.empty() || window == 0) return 0.0;
  const std::size_t n = std::min(window, curve.size());
  double sum = 0;
  for (std::size_t i = curve.size() - n; i < curve.size(); ++i) sum += curve[i].mean_reward;
  return sum / static_cast<double>(n);
}

std::string toy_metrics_header() {
  return "step\tmean_reward\tmean_outcome\tmean_process\tobjective\tkl\tclip_fraction\tgrad_norm";
}

std::string toy_metrics_row(const ToyStepMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t%.6f\t%.9g\t%.9g\t%.6f\t%.9g", m.step, m.mean_reward,
                m.mean_outcome, m.mean_process, m.objective, m.kl, m.clip_fraction, m.grad_norm);
  return buf;
}

void write_toy_run(const std::filesystem::path& dir, const TrainToyConfig& config, const TrainToyResult& result) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
    out << body;
  };
  nlohmann::ordered_json cfg{{"steps", config.steps},
                             {"facts_per_step", config.facts_per_step},
                             {"group_size", config.grpo.group_size_G},
                             {"lambda_r", config.lambda_r},
                             {"eps_std", config.grpo.eps_std},
                             {"eps_clip", config.grpo.eps_clip},
                             {"beta_kl", config.grpo.beta_kl},
                             {"kl_estimator", "exact"},
                             {"learning_rate", config.grpo.learning_rate},
                             {"num_cases", config.num_cases},
                             {"budget", config.rollout.budget_B},
                             {"top_k", config.rollout.top_k},
                             {"pi_old", "refreshed every step"},
                             {"pi_ref", "initial weights"}};
  write("config.json", cfg.dump(2) + "\n");
  nlohmann::ordered_json seeds{{"seed", config.seed}, {"rng", "mt19937_64"}};
  write("seeds.json", seeds.dump(2) + "\n");
  std::string tsv = toy_metrics_header() + "\n";
  for (const auto& m : result.curve) tsv += toy_metrics_row(m) + "\n";
  write("metrics.tsv", tsv);
  nlohmann::ordered_json weights = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < result.final_weights.rows(); ++r) {
    std::vector<double> row(result.final_weights.cols());
    for (Eigen::Index c = 0; c < result.final_weights.cols(); ++c) row[c] = result.final_weights(r, c);
    weights.push_back(row);
  }
  nlohmann::ordered_json policy{{"vocab", kToyVocab}, {"features", kToyFeatures}, {"weights", weights}};
  write("policy.json", policy.dump(2) + "\n");
}

}  // namespace msr2
