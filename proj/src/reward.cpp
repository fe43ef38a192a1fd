#include "msr2/reward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "msr2/digest.hpp"
#include "msr2/error.hpp"
#include "msr2/rubric_text.hpp"

namespace msr2 {

bool is_valid_sentence(const SentenceValue& v) {
  return std::isfinite(v.months) && v.months > 0.0 && v.months <= kMaxSentenceMonths;
}

IntervalTable::IntervalTable() : IntervalTable({6, 9, 12, 24, 36, 48, 60, 84, 120}) {}

IntervalTable::IntervalTable(std::vector<double> upper_bounds) : bounds_(std::move(upper_bounds)) {
  if (bounds_.size() != kNumSentenceClasses - 1) {
    throw Error(ErrorCode::InvalidConfig, "interval table needs " + std::to_string(kNumSentenceClasses - 1) +
                                              " boundaries, got " + std::to_string(bounds_.size()));
  }
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    if (!std::isfinite(bounds_[i]) || bounds_[i] <= 0.0 || (i > 0 && bounds_[i] <= bounds_[i - 1])) {
      throw Error(ErrorCode::InvalidConfig, "interval boundaries must be positive and strictly increasing");
    }
  }
}

IntervalTable IntervalTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open interval table " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return IntervalTable(j.at("boundaries").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": boundaries: " + e.what());
  }
}

int IntervalTable::classify(double months) const {
  // Right-closed: the first bound >= months.
  const auto it = std::lower_bound(bounds_.begin(), bounds_.end(), months);
  return static_cast<int>(it - bounds_.begin());
}

int months_to_class(const SentenceValue& v, const IntervalTable& table) { return table.classify(v.months); }

int outcome_reward(const std::optional<SentenceValue>& pred, const SentenceValue& gold, const IntervalTable& table) {
  if (!pred || !is_valid_sentence(*pred) || !is_valid_sentence(gold)) return 0;
  return months_to_class(*pred, table) == months_to_class(gold, table) ? 1 : 0;
}

RubricTemplate RubricTemplate::builtin() { return from_text(std::string(detail::kRubricTemplateV1)); }

RubricTemplate RubricTemplate::load(const std::filesystem::path& path, bool allow_modified) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open rubric " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), allow_modified);
}

RubricTemplate RubricTemplate::from_text(std::string text, bool allow_modified) {
  RubricTemplate t;
  t.digest_ = sha256_hex(text);
  t.text_ = std::move(text);
  if (!t.is_pinned() && !allow_modified) {
    throw Error(ErrorCode::RubricModified, "rubric digest " + t.digest_ + " differs from the pinned " +
                                               std::string(kPinnedRubricDigest) +
                                               "; pass --allow-modified-rubric to use it");
  }
  if (t.text_.find("{fact}") == std::string::npos || t.text_.find("{factors}") == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "rubric lacks the {fact} or {factors} placeholder");
  }
  return t;
}

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto hit = s.find(from, pos);
    if (hit == std::string::npos) break;
    out.append(s, pos, hit - pos).append(to);
    pos = hit + from.size();
  }
  out.append(s, pos);
  s = std::move(out);
}

}  // namespace

std::string RubricTemplate::render(std::string_view fact, const FactorList& factors) const {
  // Placeholders inside the substituted text are left alone: {factors} goes
  // first, then only the template's own {fact}, which precedes it.
  std::string out = text_;
  replace_all(out, "{factors}", format_factor_list(factors));
  const auto at = out.find("{fact}");
  if (at != std::string::npos) out.replace(at, 6, fact);
  return out;
}

std::string format_factor_list(const FactorList& factors) {
  if (factors.factors.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < factors.factors.size(); ++i) {
    if (i > 0) out += '\n';
    out += std::to_string(i + 1) + ". " + factors.factors[i];
  }
  return out;
}

std::optional<int> parse_judge_reply(std::string_view reply) {
  static const std::regex kAnswer(R"(<answer>\s*(-?\d+)\s*</answer>)");
  const std::string s(reply);
  std::optional<int> score;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kAnswer); it != std::sregex_iterator(); ++it) {
    const auto digits = (*it)[1].str();
    // Long digit runs saturate instead of overflowing.
    const long long v = digits.size() > 6 ? (digits[0] == '-' ? -1 : 11) : std::stoll(digits);
    score = static_cast<int>(std::clamp<long long>(v, 0, 10));
  }
  return score;
}

JudgeScore judge_factors(std::string_view fact, const FactorList& factors, Judge& judge,
                         const RubricTemplate& rubric) {
  JudgeScore out;
  out.reply = judge.judge(rubric.render(fact, factors));
  if (const auto s = parse_judge_reply(out.reply)) {
    out.score = *s;
  } else {
    out.parse_failure = true;
  }
  return out;
}

double process_reward(int score) { return static_cast<double>(std::clamp(score, 0, 10)) / 10.0; }

double total_reward(int outcome, double process, double lambda_r) {
  return (1.0 - lambda_r) * static_cast<double>(outcome) + lambda_r * process;
}

RewardBreakdown score_segments(std::string_view fact, const std::vector<Segment>& segments, const SentenceValue& gold,
                               const IntervalTable& table, Judge& judge, double lambda_r,
                               const RubricTemplate& rubric) {
  RewardBreakdown r;
  r.lambda_r = lambda_r;
  std::optional<SentenceValue> pred;
  if (const auto answer = final_answer(segments)) {
    r.answered = true;
    try {
      pred = extract_answer(*answer);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparsableAnswer) throw;
    }
  }
  r.outcome_O = outcome_reward(pred, gold, table);
  if (lambda_r != 0.0) {
    for (const auto& s : segments) {
      if (s.kind != SegmentKind::Factors || s.origin != Origin::Generated) continue;
      const auto js = judge_factors(fact, extract_factors(s.text), judge, rubric);
      r.judge_scores.push_back(js.score);
      if (js.parse_failure) ++r.judge_parse_failures;
    }
  }
  if (!r.judge_scores.empty()) {
    const double mean = std::accumulate(r.judge_scores.begin(), r.judge_scores.end(), 0.0) /
                        static_cast<double>(r.judge_scores.size());
    r.process_P = mean / 10.0;
  }
  r.total_R = total_reward(r.outcome_O, r.process_P, lambda_r);
  return r;
}

namespace {

std::vector<double> mid_ranks(const std::vector<int>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

RankCorrelation rank_correlations(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::InvalidConfig, "score lists differ in length");
  if (a.size() < 2) throw Error(ErrorCode::InvalidConfig, "rank correlation needs at least two items");
  const auto constant = [](const std::vector<int>& v) {
    return std::all_of(v.begin(), v.end(), [&](int x) { return x == v.front(); });
  };
  if (constant(a) || constant(b)) throw Error(ErrorCode::CorrelationUndefined, "a score list is constant");

  RankCorrelation out;
  out.spearman_rho = pearson(mid_ranks(a), mid_ranks(b));

  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const int da = (a[i] > a[j]) - (a[i] < a[j]);
      const int db = (b[i] > b[j]) - (b[i] < b[j]);
      if (da == 0 && db == 0) continue;
      if (da == 0) {
        ++ties_a;
      } else if (db == 0) {
        ++ties_b;
      } else if (da == db) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n1 = static_cast<double>(concordant + discordant + ties_a);
  const double n2 = static_cast<double>(concordant + discordant + ties_b);
  out.kendall_tau = static_cast<double>(concordant - discordant) / std::sqrt(n1 * n2);
  return out;
}

}  // namespace msr2
