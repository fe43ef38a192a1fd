#include "msr2/lexical_index.hpp"

#include <cmath>
#include <map>
#include <unordered_set>

#include "msr2/error.hpp"
#include "msr2/text_tokenizer.hpp"

namespace msr2 {

LexicalIndex LexicalIndex::build(std::span<const CorpusRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index an empty record set");
  std::unordered_set<std::string> seen;
  std::unordered_map<std::string, std::vector<Posting>> postings;
  std::vector<std::uint32_t> lengths;
  lengths.reserve(records.size());
  for (std::size_t d = 0; d < records.size(); ++d) {
    if (!seen.insert(records[d].doc_id).second) {
      throw Error(ErrorCode::DuplicateDoc, "doc_id '" + records[d].doc_id + "' appears more than once");
    }
    const auto terms = tokenize(records[d].text);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : terms) ++tf[t];
    for (auto& [term, count] : tf) postings[term].push_back({static_cast<std::uint32_t>(d), count});
    lengths.push_back(static_cast<std::uint32_t>(terms.size()));
  }
  return from_parts(std::move(postings), std::move(lengths));
}

LexicalIndex LexicalIndex::from_parts(std::unordered_map<std::string, std::vector<Posting>> postings,
                                      std::vector<std::uint32_t> doc_lengths) {
  if (doc_lengths.empty()) throw Error(ErrorCode::EmptyCorpus, "index has no documents");
  LexicalIndex index;
  index.postings_ = std::move(postings);
  index.doc_lengths_ = std::move(doc_lengths);
  double total = 0.0;
  for (auto len : index.doc_lengths_) total += len;
  index.avgdl_ = total / static_cast<double>(index.doc_lengths_.size());
  return index;
}

std::size_t LexicalIndex::document_frequency(const std::string& term) const {
  const auto* p = postings(term);
  return p ? p->size() : 0;
}

const std::vector<LexicalIndex::Posting>* LexicalIndex::postings(const std::string& term) const {
  const auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

double LexicalIndex::idf(std::size_t df) const {
  const double n = static_cast<double>(doc_count());
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

std::vector<std::pair<std::uint32_t, double>> LexicalIndex::score(std::span<const std::string> query_terms,
                                                                  const Bm25Params& params) const {
  std::vector<double> acc(doc_count(), 0.0);
  std::vector<char> touched(doc_count(), 0);
  for (const auto& term : query_terms) {
    const auto* plist = postings(term);
    if (!plist) continue;
    const double w = idf(plist->size());
    for (const auto& p : *plist) {
      const double tf = p.tf;
      const double norm = params.k1 * (1.0 - params.b + params.b * doc_lengths_[p.doc] / avgdl_);
      acc[p.doc] += w * tf * (params.k1 + 1.0) / (tf + norm);
      touched[p.doc] = 1;
    }
  }
  std::vector<std::pair<std::uint32_t, double>> out;
  for (std::uint32_t d = 0; d < acc.size(); ++d) {
    if (touched[d] && acc[d] > 0.0) out.emplace_back(d, acc[d]);
  }
  return out;
}

}  // namespace msr2
