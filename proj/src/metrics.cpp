#include "msr2/metrics.hpp"

#include <fstream>
#include <numeric>
#include <unordered_set>

#include "json.hpp"

namespace msr2 {

long long ConfusionMatrix::total() const {
  long long n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), 0LL);
  return n;
}

ConfusionMatrix confusion_matrix(const std::vector<EvalRecord>& records, const IntervalTable& table) {
  ConfusionMatrix m;
  for (const auto& r : records) {
    if (!is_valid_sentence(r.gold_months)) {
      throw Error(ErrorCode::InvalidConfig, "case '" + r.case_id + "' has an invalid gold sentence");
    }
    const int g = months_to_class(r.gold_months, table);
    const int p = (r.pred_months && is_valid_sentence(*r.pred_months)) ? months_to_class(*r.pred_months, table)
                                                                       : ConfusionMatrix::kUnparsable;
    ++m.counts[g][p];
  }
  return m;
}

double accuracy(const std::vector<EvalRecord>& records, const IntervalTable& table) {
  if (records.empty()) throw Error(ErrorCode::EmptyEval, "no records to evaluate");
  const auto m = confusion_matrix(records, table);
  long long hits = 0;
  for (int c = 0; c < kNumSentenceClasses; ++c) hits += m.counts[c][c];
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

MacroPRF macro_prf(const std::vector<EvalRecord>& records, const IntervalTable& table) {
  if (records.empty()) throw Error(ErrorCode::EmptyEval, "no records to evaluate");
  const auto m = confusion_matrix(records, table);
  MacroPRF out;
  for (int c = 0; c < kNumSentenceClasses; ++c) {
    const long long tp = m.counts[c][c];
    long long predicted = 0;
    for (int g = 0; g < kNumSentenceClasses; ++g) predicted += m.counts[g][c];
    const long long gold = std::accumulate(m.counts[c].begin(), m.counts[c].end(), 0LL);
    auto& s = out.per_class[c];
    s.support = gold;
    s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    s.recall = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
    s.f1 = (s.precision + s.recall) > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    out.precision += s.precision;
    out.recall += s.recall;
    out.f1 += s.f1;
  }
  out.precision /= kNumSentenceClasses;
  out.recall /= kNumSentenceClasses;
  out.f1 /= kNumSentenceClasses;
  return out;
}

std::vector<EvalRecord> read_predictions(std::istream& in) {
  std::vector<EvalRecord> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, where + e.what());
    }
    EvalRecord r;
    if (!j.contains("case_id") || !j["case_id"].is_string()) throw Error(ErrorCode::ParseError, where + "case_id");
    r.case_id = j["case_id"].get<std::string>();
    if (!seen.insert(r.case_id).second) {
      throw Error(ErrorCode::ParseError, where + "duplicate case_id '" + r.case_id + "'");
    }
    if (!j.contains("gold_months") || !j["gold_months"].is_number()) {
      throw Error(ErrorCode::ParseError, where + "gold_months must be a number");
    }
    r.gold_months = {j["gold_months"].get<double>()};
    if (!is_valid_sentence(r.gold_months)) throw Error(ErrorCode::ParseError, where + "gold_months outside (0, 600]");
    if (j.contains("pred_months")) {
      const auto& p = j["pred_months"];
      if (p.is_number()) {
        r.pred_months = SentenceValue{p.get<double>()};
      } else if (p.is_string()) {
        try {
          r.pred_months = extract_answer(p.get<std::string>());
        } catch (const Error& e) {
          if (e.code() != ErrorCode::UnparsableAnswer) throw;
        }
      } else if (!p.is_null()) {
        throw Error(ErrorCode::ParseError, where + "pred_months must be a number, string or null");
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EvalRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return read_predictions(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

}  // namespace msr2
