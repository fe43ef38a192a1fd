#pragma once

// Reference implementations written independently of the library: plain
// loops over std::vector, no Eigen, no shared helpers. Tests compare the
// library against these, never the other way round.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Retrieval

/// Lowercased ASCII alphanumeric runs. Only valid for ASCII fixtures.
inline std::vector<std::string> ascii_terms(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct ScoredDoc {
  std::string doc_id;
  double score;
};

inline bool better(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

/// Full-scan Okapi BM25 with idf ln(1 + (N - df + 0.5) / (df + 0.5)).
/// Every occurrence of a query term contributes. Positive scores only.
inline std::vector<ScoredDoc> bm25(const std::vector<std::pair<std::string, std::vector<std::string>>>& docs,
                                   const std::vector<std::string>& query, double k1 = 1.2, double b = 0.75) {
  const double N = static_cast<double>(docs.size());
  double total_len = 0;
  for (const auto& d : docs) total_len += static_cast<double>(d.second.size());
  const double avgdl = total_len / N;
  std::vector<ScoredDoc> out;
  for (const auto& d : docs) {
    double s = 0;
    for (const auto& q : query) {
      double df = 0;
      for (const auto& other : docs) {
        if (std::find(other.second.begin(), other.second.end(), q) != other.second.end()) df += 1;
      }
      const double tf = static_cast<double>(std::count(d.second.begin(), d.second.end(), q));
      if (tf == 0) continue;
      const double idf = std::log(1.0 + (N - df + 0.5) / (df + 0.5));
      const double dl = static_cast<double>(d.second.size());
      s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
    }
    if (s > 0) out.push_back({d.first, s});
  }
  std::sort(out.begin(), out.end(), better);
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

/// Indices of the k most cosine-similar vectors, ties by index.
inline std::vector<std::pair<std::size_t, double>> cosine_top_k(const std::vector<std::vector<double>>& docs,
                                                                const std::vector<double>& query, std::size_t k) {
  std::vector<std::pair<std::size_t, double>> all;
  for (std::size_t i = 0; i < docs.size(); ++i) all.emplace_back(i, cosine(docs[i], query));
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (all.size() > k) all.resize(k);
  return all;
}

// ---------------------------------------------------------------------------
// Policy optimization

struct NaiveTrajectory {
  std::vector<double> logp_new, logp_old, logp_ref;
  std::vector<int> generated;  // 1 or 0 per token
  std::optional<std::vector<double>> kl;
};

/// Clipped surrogate minus beta * KL, mean over generated tokens then over
/// the group, written out term by term.
inline double grpo_objective(const std::vector<double>& rewards, const std::vector<NaiveTrajectory>& group,
                             double eps_std, double eps_clip, double beta) {
  const double G = static_cast<double>(rewards.size());
  double mean = 0;
  for (const double r : rewards) mean += r;
  mean /= G;
  double var = 0;
  for (const double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / G);

  double objective = 0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const double adv = (rewards[i] - mean) / (sd + eps_std);
    const auto& tr = group[i];
    double z = 0, sum = 0;
    for (std::size_t t = 0; t < tr.logp_new.size(); ++t) {
      if (!tr.generated[t]) continue;
      z += 1;
      const double ratio = std::exp(tr.logp_new[t] - tr.logp_old[t]);
      double clipped = ratio;
      if (clipped < 1 - eps_clip) clipped = 1 - eps_clip;
      if (clipped > 1 + eps_clip) clipped = 1 + eps_clip;
      const double a = ratio * adv, c = clipped * adv;
      double kl;
      if (tr.kl) {
        kl = (*tr.kl)[t];
      } else {
        const double x = tr.logp_ref[t] - tr.logp_new[t];
        kl = std::exp(x) - x - 1;
      }
      sum += (a < c ? a : c) - beta * kl;
    }
    objective += sum / z;
  }
  return objective / G;
}

inline double categorical_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0) s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Rank statistics

/// 1-based average ranks.
inline std::vector<double> mid_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) less += 1;
      if (x[j] == x[i]) equal += 1;
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(mid_ranks(a), mid_ranks(b));
}

/// Kendall tau-b by pair enumeration.
inline double kendall_tau_b(const std::vector<double>& a, const std::vector<double>& b) {
  double concordant = 0, discordant = 0, tie_a = 0, tie_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      if (da == 0 && db == 0) continue;
      if (da == 0) {
        tie_a += 1;
      } else if (db == 0) {
        tie_b += 1;
      } else if ((da > 0) == (db > 0)) {
        concordant += 1;
      } else {
        discordant += 1;
      }
    }
  }
  return (concordant - discordant) /
         std::sqrt((concordant + discordant + tie_a) * (concordant + discordant + tie_b));
}

// ---------------------------------------------------------------------------
// Classification metrics

struct Prf {
  double precision, recall, f1;
};

/// Macro scores from a square confusion matrix (rows gold, columns predicted)
/// plus per-row counts of predictions outside every class. Undefined ratios
/// count as 0; the average runs over all rows.
inline Prf macro_from_confusion(const std::vector<std::vector<double>>& m, const std::vector<double>& unparsable) {
  const std::size_t n = m.size();
  Prf sum{0, 0, 0};
  for (std::size_t c = 0; c < n; ++c) {
    const double tp = m[c][c];
    double col = 0, row = unparsable[c];
    for (std::size_t k = 0; k < n; ++k) {
      col += m[k][c];
      row += m[c][k];
    }
    const double p = col > 0 ? tp / col : 0;
    const double r = row > 0 ? tp / row : 0;
    const double f = (p + r) > 0 ? 2 * p * r / (p + r) : 0;
    sum.precision += p;
    sum.recall += r;
    sum.f1 += f;
  }
  const double dn = static_cast<double>(n);
  return {sum.precision / dn, sum.recall / dn, sum.f1 / dn};
}

}  // namespace oracle
