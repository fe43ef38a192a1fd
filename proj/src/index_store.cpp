#include "msr2/index_store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "msr2/error.hpp"

namespace msr2 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "vectors.bin assumes a little-endian host");

std::ofstream open_out(const fs::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p, bool binary = false) {
  std::ifstream in(p, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  return in;
}

json read_json(const fs::path& p) {
  auto in = open_in(p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, p.string() + ": " + e.what());
  }
}

json params_to_json(const RetrievalParams& p) {
  return json{{"bm25_k1", p.bm25.k1},
              {"bm25_b", p.bm25.b},
              {"k_rrf", p.k_rrf},
              {"hybrid_depth", p.hybrid_depth},
              {"hnsw_degree", p.hnsw.degree},
              {"hnsw_ef_construction", p.hnsw.ef_construction},
              {"hnsw_ef_search", p.hnsw.ef_search},
              {"hnsw_seed", p.hnsw.seed},
              {"approx_threshold", p.approx_threshold}};
}

RetrievalParams params_from_json(const json& j) {
  RetrievalParams p;
  p.bm25.k1 = j.at("bm25_k1").get<double>();
  p.bm25.b = j.at("bm25_b").get<double>();
  p.k_rrf = j.at("k_rrf").get<int>();
  p.hybrid_depth = j.at("hybrid_depth").get<std::size_t>();
  p.hnsw.degree = j.at("hnsw_degree").get<int>();
  p.hnsw.ef_construction = j.at("hnsw_ef_construction").get<int>();
  p.hnsw.ef_search = j.at("hnsw_ef_search").get<int>();
  p.hnsw.seed = j.at("hnsw_seed").get<std::uint64_t>();
  p.approx_threshold = j.at("approx_threshold").get<std::size_t>();
  return p;
}

}  // namespace

EmbedderFactory default_embedder_factory() {
  return [](const std::string& kind, std::size_t dim) -> std::shared_ptr<const Embedder> {
    if (kind == "hashing") return std::make_shared<HashingEmbedder>(dim);
    throw Error(ErrorCode::EmbedderUnavailable, "no embedder available for kind '" + kind + "'");
  };
}

void save_source(const IndexedSource& source, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest{{"format_version", kIndexFormatVersion},
                {"source_id", source.source_id()},
                {"strategy", std::string(to_string(source.strategy()))},
                {"embed_dim", source.embed_dim()},
                {"embedder", source.embedder() ? source.embedder()->kind() : std::string("none")},
                {"parameters", params_to_json(source.params())},
                {"record_count", source.records().size()},
                {"term_count", source.lexical_index() ? source.lexical_index()->term_count() : 0}};
  open_out(dir / "manifest.json") << manifest.dump(2) << "\n";

  {
    auto out = open_out(dir / "records.jsonl");
    for (const auto& r : source.records()) out << to_jsonl_line(r) << "\n";
  }

  if (const auto* lex = source.lexical_index()) {
    std::vector<const std::string*> terms;
    terms.reserve(lex->term_count());
    for (const auto& [term, plist] : lex->all_postings()) terms.push_back(&term);
    std::sort(terms.begin(), terms.end(), [](const auto* a, const auto* b) { return *a < *b; });
    auto out = open_out(dir / "postings.tsv");
    for (const auto* term : terms) {
      const auto& plist = *lex->postings(*term);
      out << *term << '\t' << plist.size() << '\t';
      for (std::size_t i = 0; i < plist.size(); ++i) {
        if (i) out << ' ';
        out << plist[i].doc << ':' << plist[i].tf;
      }
      out << '\n';
    }
    auto lens = open_out(dir / "doclens.txt");
    for (auto len : lex->doc_lengths()) lens << len << '\n';
  }

  if (const auto* vec = source.raw_vectors()) {
    auto out = open_out(dir / "vectors.bin", true);
    out.write(reinterpret_cast<const char*>(vec->data()),
              static_cast<std::streamsize>(vec->size() * static_cast<Eigen::Index>(sizeof(double))));
  }
}

std::shared_ptr<const IndexedSource> load_source(const fs::path& dir, const EmbedderFactory& embedders) {
  const json manifest = read_json(dir / "manifest.json");
  const int version = manifest.value("format_version", -1);
  if (version != kIndexFormatVersion) {
    throw Error(ErrorCode::FormatVersion, dir.string() + " has format version " + std::to_string(version) +
                                              ", expected " + std::to_string(kIndexFormatVersion));
  }
  const auto source_id = manifest.at("source_id").get<std::string>();
  const auto strategy = index_strategy_from_string(manifest.at("strategy").get<std::string>());
  const auto params = params_from_json(manifest.at("parameters"));
  const auto record_count = manifest.at("record_count").get<std::size_t>();
  const auto embed_dim = manifest.at("embed_dim").get<std::size_t>();

  auto records = read_corpus_jsonl(dir / "records.jsonl");
  if (records.size() != record_count) {
    throw Error(ErrorCode::ParseError, dir.string() + ": manifest record_count disagrees with records.jsonl");
  }

  std::optional<LexicalIndex> lexical;
  if (fs::exists(dir / "postings.tsv")) {
    std::unordered_map<std::string, std::vector<LexicalIndex::Posting>> postings;
    auto in = open_in(dir / "postings.tsv");
    std::string line;
    while (std::getline(in, line)) {
      const auto t1 = line.find('\t');
      const auto t2 = line.find('\t', t1 + 1);
      if (t1 == std::string::npos || t2 == std::string::npos) {
        throw Error(ErrorCode::ParseError, "malformed postings line in " + dir.string());
      }
      std::vector<LexicalIndex::Posting> plist;
      std::istringstream entries(line.substr(t2 + 1));
      std::string entry;
      while (entries >> entry) {
        const auto colon = entry.find(':');
        plist.push_back({static_cast<std::uint32_t>(std::stoul(entry.substr(0, colon))),
                         static_cast<std::uint32_t>(std::stoul(entry.substr(colon + 1)))});
      }
      if (plist.size() != std::stoul(line.substr(t1 + 1, t2 - t1 - 1))) {
        throw Error(ErrorCode::ParseError, "postings df mismatch in " + dir.string());
      }
      postings.emplace(line.substr(0, t1), std::move(plist));
    }
    std::vector<std::uint32_t> lens;
    auto lin = open_in(dir / "doclens.txt");
    std::uint32_t len = 0;
    while (lin >> len) lens.push_back(len);
    lexical = LexicalIndex::from_parts(std::move(postings), std::move(lens));
  }

  std::shared_ptr<const Embedder> embedder;
  std::optional<Eigen::MatrixXd> vectors;
  if (fs::exists(dir / "vectors.bin")) {
    embedder = embedders(manifest.at("embedder").get<std::string>(), embed_dim);
    if (embedder->dim() != embed_dim) throw Error(ErrorCode::DimMismatch, "embedder dimension differs from manifest");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(embed_dim), static_cast<Eigen::Index>(record_count));
    auto in = open_in(dir / "vectors.bin", true);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * static_cast<Eigen::Index>(sizeof(double))));
    if (in.gcount() != static_cast<std::streamsize>(m.size() * static_cast<Eigen::Index>(sizeof(double)))) {
      throw Error(ErrorCode::ParseError, dir.string() + ": vectors.bin is truncated");
    }
    vectors = std::move(m);
  }
  return IndexedSource::assemble(source_id, strategy, std::move(records), std::move(lexical), std::move(vectors),
                                 std::move(embedder), params);
}

RegistryMeta read_registry_meta(const fs::path& dir) {
  RegistryMeta meta;
  if (!fs::exists(dir / "registry.json")) return meta;
  const json j = read_json(dir / "registry.json");
  meta.default_source = j.value("default_source", std::string());
  if (j.contains("aliases")) meta.aliases = j.at("aliases").get<std::map<std::string, std::string>>();
  return meta;
}

void write_registry_meta(const fs::path& dir, const RegistryMeta& meta) {
  fs::create_directories(dir);
  json j{{"format_version", kIndexFormatVersion}, {"default_source", meta.default_source}, {"aliases", meta.aliases}};
  open_out(dir / "registry.json") << j.dump(2) << "\n";
}

std::shared_ptr<SourceRegistry> load_registry(const fs::path& dir, const EmbedderFactory& embedders) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "registry directory " + dir.string() + " not found");
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  if (subdirs.empty()) throw Error(ErrorCode::EmptyCorpus, "registry " + dir.string() + " has no sources");
  auto registry = std::make_shared<SourceRegistry>();
  for (const auto& sub : subdirs) registry->add(load_source(sub, embedders));
  const auto meta = read_registry_meta(dir);
  if (!meta.default_source.empty()) registry->set_default(meta.default_source);
  for (const auto& [tag, id] : meta.aliases) registry->add_alias(tag, id);
  return registry;
}

}  // namespace msr2
