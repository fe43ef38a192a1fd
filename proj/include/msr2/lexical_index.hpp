#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "msr2/corpus.hpp"

namespace msr2 {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Inverted index over tokenize()d record text.
class LexicalIndex {
 public:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;

    bool operator==(const Posting&) const = default;
  };

  /// Throws EmptyCorpus on no records and DuplicateDoc on a repeated doc_id.
  static LexicalIndex build(std::span<const CorpusRecord> records);

  /// Reassembles an index from persisted parts.
  static LexicalIndex from_parts(std::unordered_map<std::string, std::vector<Posting>> postings,
                                 std::vector<std::uint32_t> doc_lengths);

  std::size_t doc_count() const { return doc_lengths_.size(); }
  std::size_t term_count() const { return postings_.size(); }
  double avg_doc_length() const { return avgdl_; }
  std::uint32_t doc_length(std::uint32_t doc) const { return doc_lengths_.at(doc); }
  const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }

  std::size_t document_frequency(const std::string& term) const;
  const std::vector<Posting>* postings(const std::string& term) const;
  const std::unordered_map<std::string, std::vector<Posting>>& all_postings() const { return postings_; }

  /// Non-negative idf: ln(1 + (N - df + 0.5) / (df + 0.5)).
  double idf(std::size_t df) const;

  /// BM25 score for every document with a positive score. Query terms are
  /// summed per occurrence, so a repeated term counts twice.
  std::vector<std::pair<std::uint32_t, double>> score(std::span<const std::string> query_terms,
                                                      const Bm25Params& params) const;

 private:
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_lengths_;
  double avgdl_ = 0.0;
};

}  // namespace msr2
