#pragma once

#include <span>
#include <vector>

#include "msr2/tag_protocol.hpp"

namespace msr2 {

inline constexpr int kDefaultRrfK = 60;

/// Reciprocal-rank fusion: score(d) = sum over lists containing d of
/// 1 / (k_rrf + rank(d)). Output covers every input document, ordered by
/// fused score then doc_id, with ranks reassigned 1..n. Source id and text
/// are taken from the first list that contains the document.
std::vector<Evidence> fuse_rrf(std::span<const std::vector<Evidence>> rankings, int k_rrf = kDefaultRrfK);

/// Sorts by descending score, ties by ascending doc_id, truncates to k and
/// assigns ranks 1..k.
void rank_evidence(std::vector<Evidence>& items, std::size_t k);

}  // namespace msr2
