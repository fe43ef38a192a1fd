#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace msr2 {

struct CorpusRecord {
  std::string doc_id;
  std::string text;
  std::map<std::string, std::string> metadata;

  bool operator==(const CorpusRecord&) const = default;
};

/// One JSON object per line: {"doc_id": ..., "text": ..., "metadata": {...}}.
/// Blank lines are skipped; errors name the 1-based line number.
std::vector<CorpusRecord> read_corpus_jsonl(std::istream& in);
std::vector<CorpusRecord> read_corpus_jsonl(const std::filesystem::path& path);

std::string to_jsonl_line(const CorpusRecord& record);

/// Cuts a long text into overlapping windows of `window` code points that
/// advance by `window - overlap`. Used for passage-level sources such as books.
std::vector<std::string> segment_passages(std::string_view text, std::size_t window, std::size_t overlap);

/// Expands each record into passage records "<doc_id>#p<n>" carrying the
/// parent id in metadata["parent"].
std::vector<CorpusRecord> split_into_passages(const std::vector<CorpusRecord>& records, std::size_t window,
                                              std::size_t overlap);

}  // namespace msr2
