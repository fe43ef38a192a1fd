#include "msr2/fusion.hpp"

#include <algorithm>
#include <map>

namespace msr2 {

void rank_evidence(std::vector<Evidence>& items, std::size_t k) {
  const auto better = [](const Evidence& a, const Evidence& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  };
  if (items.size() > k) {
    std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k), items.end(), better);
    items.resize(k);
  } else {
    std::sort(items.begin(), items.end(), better);
  }
  for (std::size_t i = 0; i < items.size(); ++i) items[i].rank = static_cast<int>(i + 1);
}

std::vector<Evidence> fuse_rrf(std::span<const std::vector<Evidence>> rankings, int k_rrf) {
  std::map<std::string, Evidence> fused;
  for (const auto& list : rankings) {
    for (const auto& e : list) {
      auto [it, inserted] = fused.try_emplace(e.doc_id, e);
      if (inserted) it->second.score = 0.0;
      it->second.score += 1.0 / static_cast<double>(k_rrf + e.rank);
    }
  }
  std::vector<Evidence> out;
  out.reserve(fused.size());
  for (auto& [id, e] : fused) out.push_back(std::move(e));
  rank_evidence(out, out.size());
  return out;
}

}  // namespace msr2
