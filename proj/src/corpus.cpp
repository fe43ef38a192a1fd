#include "msr2/corpus.hpp"

#include <fstream>
#include "json.hpp"

#include "msr2/error.hpp"

namespace msr2 {

namespace {

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

std::vector<std::size_t> code_point_starts(std::string_view text) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) starts.push_back(i);
  }
  return starts;
}

}  // namespace

std::vector<CorpusRecord> read_corpus_jsonl(std::istream& in) {
  std::vector<CorpusRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ParseError, line_error(line_no, e.what()));
    }
    if (!j.is_object()) throw Error(ErrorCode::ParseError, line_error(line_no, "expected a JSON object"));
    CorpusRecord r;
    if (!j.contains("doc_id") || !j["doc_id"].is_string() || j["doc_id"].get<std::string>().empty()) {
      throw Error(ErrorCode::ParseError, line_error(line_no, "missing or empty string field 'doc_id'"));
    }
    if (!j.contains("text") || !j["text"].is_string() || j["text"].get<std::string>().empty()) {
      throw Error(ErrorCode::ParseError, line_error(line_no, "missing or empty string field 'text'"));
    }
    r.doc_id = j["doc_id"].get<std::string>();
    r.text = j["text"].get<std::string>();
    if (j.contains("metadata")) {
      const auto& m = j["metadata"];
      if (!m.is_object()) throw Error(ErrorCode::ParseError, line_error(line_no, "'metadata' must be an object"));
      for (const auto& [key, value] : m.items()) {
        if (!value.is_string()) {
          throw Error(ErrorCode::ParseError, line_error(line_no, "metadata value '" + key + "' is not a string"));
        }
        r.metadata.emplace(key, value.get<std::string>());
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<CorpusRecord> read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open corpus file " + path.string());
  return read_corpus_jsonl(in);
}

std::string to_jsonl_line(const CorpusRecord& record) {
  nlohmann::json j;
  j["doc_id"] = record.doc_id;
  j["text"] = record.text;
  j["metadata"] = nlohmann::json::object();
  for (const auto& [k, v] : record.metadata) j["metadata"][k] = v;
  return j.dump();
}

std::vector<std::string> segment_passages(std::string_view text, std::size_t window, std::size_t overlap) {
  if (window == 0 || overlap >= window) {
    throw Error(ErrorCode::InvalidConfig, "passage window must be positive and larger than the overlap");
  }
  const auto starts = code_point_starts(text);
  std::vector<std::string> passages;
  if (starts.empty()) return passages;
  const std::size_t stride = window - overlap;
  for (std::size_t first = 0;; first += stride) {
    const std::size_t last = std::min(first + window, starts.size());
    const std::size_t b = starts[first];
    const std::size_t e = last < starts.size() ? starts[last] : text.size();
    passages.emplace_back(text.substr(b, e - b));
    if (last == starts.size()) break;
  }
  return passages;
}

std::vector<CorpusRecord> split_into_passages(const std::vector<CorpusRecord>& records, std::size_t window,
                                              std::size_t overlap) {
  std::vector<CorpusRecord> out;
  for (const auto& r : records) {
    const auto pieces = segment_passages(r.text, window, overlap);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      CorpusRecord p;
      p.doc_id = r.doc_id + "#p" + std::to_string(i);
      p.text = pieces[i];
      p.metadata = r.metadata;
      p.metadata["parent"] = r.doc_id;
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace msr2
