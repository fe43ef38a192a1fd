#include "msr2/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

#include "msr2/error.hpp"

namespace msr2 {

VectorStore::VectorStore(const Eigen::MatrixXd& columns) : unit_(columns), norms_(columns.colwise().norm().transpose()) {
  for (Eigen::Index c = 0; c < unit_.cols(); ++c) {
    if (!(norms_[c] > 0.0) || !std::isfinite(norms_[c])) {
      throw Error(ErrorCode::InvalidConfig, "vector " + std::to_string(c) + " has zero or non-finite norm");
    }
    unit_.col(c) /= norms_[c];
  }
}

Eigen::VectorXd ExactVectorIndex::similarities(const Eigen::VectorXd& query) const {
  if (query.size() != store_->dim()) {
    throw Error(ErrorCode::DimMismatch, "query has dimension " + std::to_string(query.size()) + ", index has " +
                                            std::to_string(store_->dim()));
  }
  const double qn = query.norm();
  if (!(qn > 0.0)) throw Error(ErrorCode::DimMismatch, "query vector has zero norm");
  return store_->unit_vectors().transpose() * (query / qn);
}

namespace {

struct ByScoreAsc {
  bool operator()(const ScoredId& a, const ScoredId& b) const { return a.second > b.second; }
};
struct ByScoreDesc {
  bool operator()(const ScoredId& a, const ScoredId& b) const { return a.second < b.second; }
};

}  // namespace

HnswIndex::HnswIndex(const VectorStore& store, HnswParams params) : store_(&store), params_(params) {
  if (params_.degree < 2 || params_.ef_construction < 1 || params_.ef_search < 1) {
    throw Error(ErrorCode::InvalidConfig, "invalid HNSW parameters");
  }
  const std::size_t n = store.size();
  links_.resize(n);
  std::mt19937_64 rng(params_.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double ml = 1.0 / std::log(static_cast<double>(params_.degree));
  for (std::uint32_t id = 0; id < n; ++id) {
    const double u = std::max(unif(rng), 1e-300);
    const int level = static_cast<int>(std::floor(-std::log(u) * ml));
    insert(id, level);
  }
}

std::size_t HnswIndex::max_links(int level) const {
  return static_cast<std::size_t>(level == 0 ? 2 * params_.degree : params_.degree);
}

std::vector<ScoredId> HnswIndex::search_layer(const Eigen::VectorXd& q, const std::vector<ScoredId>& entry, int ef,
                                              int level) const {
  std::vector<char> visited(store_->size(), 0);
  std::priority_queue<ScoredId, std::vector<ScoredId>, ByScoreDesc> candidates;  // best on top
  std::priority_queue<ScoredId, std::vector<ScoredId>, ByScoreAsc> found;        // worst on top
  for (const auto& e : entry) {
    visited[e.first] = 1;
    candidates.push(e);
    found.push(e);
  }
  while (static_cast<int>(found.size()) > ef) found.pop();
  while (!candidates.empty()) {
    const auto c = candidates.top();
    candidates.pop();
    if (c.second < found.top().second && static_cast<int>(found.size()) >= ef) break;
    for (auto nb : links_[c.first][static_cast<std::size_t>(level)]) {
      if (visited[nb]) continue;
      visited[nb] = 1;
      const double s = store_->cosine(nb, q);
      if (static_cast<int>(found.size()) < ef || s > found.top().second) {
        candidates.emplace(nb, s);
        found.emplace(nb, s);
        if (static_cast<int>(found.size()) > ef) found.pop();
      }
    }
  }
  std::vector<ScoredId> out;
  out.reserve(found.size());
  while (!found.empty()) {
    out.push_back(found.top());
    found.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

// Keeps a candidate only if it is closer to the base point than to every
// neighbor already kept; candidates arrive best-first.
std::vector<std::uint32_t> HnswIndex::select_neighbors(const std::vector<ScoredId>& candidates, std::size_t m) const {
  std::vector<std::uint32_t> kept;
  for (const auto& [id, sim_to_base] : candidates) {
    if (kept.size() >= m) break;
    bool good = true;
    for (auto r : kept) {
      if (store_->unit_vectors().col(id).dot(store_->unit_vectors().col(r)) > sim_to_base) {
        good = false;
        break;
      }
    }
    if (good) kept.push_back(id);
  }
  return kept;
}

void HnswIndex::insert(std::uint32_t id, int level) {
  links_[id].assign(static_cast<std::size_t>(level) + 1, {});
  if (max_level_ < 0) {
    entry_ = id;
    max_level_ = level;
    return;
  }
  const Eigen::VectorXd q = store_->unit_vectors().col(id);
  std::vector<ScoredId> ep{{entry_, store_->cosine(entry_, q)}};
  for (int lc = max_level_; lc > level; --lc) ep = search_layer(q, ep, 1, lc);

  for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
    auto found = search_layer(q, ep, params_.ef_construction, lc);
    const auto neighbors = select_neighbors(found, static_cast<std::size_t>(params_.degree));
    auto& own = links_[id][static_cast<std::size_t>(lc)];
    own = neighbors;
    for (auto nb : neighbors) {
      auto& theirs = links_[nb][static_cast<std::size_t>(lc)];
      theirs.push_back(id);
      if (theirs.size() > max_links(lc)) {
        const Eigen::VectorXd base = store_->unit_vectors().col(nb);
        std::vector<ScoredId> scored;
        scored.reserve(theirs.size());
        for (auto t : theirs) scored.emplace_back(t, store_->cosine(t, base));
        std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
          return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        theirs = select_neighbors(scored, max_links(lc));
      }
    }
    ep = std::move(found);
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = id;
  }
}

std::vector<ScoredId> HnswIndex::search(const Eigen::VectorXd& unit_query, std::size_t k, int ef) const {
  if (unit_query.size() != store_->dim()) {
    throw Error(ErrorCode::DimMismatch, "query has dimension " + std::to_string(unit_query.size()) +
                                            ", index has " + std::to_string(store_->dim()));
  }
  if (max_level_ < 0 || k == 0) return {};
  const int beam = std::max({ef > 0 ? ef : params_.ef_search, static_cast<int>(k), 1});
  std::vector<ScoredId> ep{{entry_, store_->cosine(entry_, unit_query)}};
  for (int lc = max_level_; lc > 0; --lc) ep = search_layer(unit_query, ep, 1, lc);
  auto found = search_layer(unit_query, ep, beam, 0);
  if (found.size() > k) found.resize(k);
  return found;
}

}  // namespace msr2
