#include "msr2/retrieval.hpp"

#include <algorithm>
#include <mutex>
#include <unordered_set>

#include "msr2/error.hpp"
#include "msr2/text_tokenizer.hpp"

namespace msr2 {

std::string_view to_string(IndexStrategy strategy) {
  switch (strategy) {
    case IndexStrategy::Lexical: return "lexical";
    case IndexStrategy::DenseExact: return "dense-exact";
    case IndexStrategy::DenseApprox: return "dense-approx";
    case IndexStrategy::Hybrid: return "hybrid";
  }
  return "lexical";
}

IndexStrategy index_strategy_from_string(std::string_view name) {
  if (name == "lexical") return IndexStrategy::Lexical;
  if (name == "dense-exact") return IndexStrategy::DenseExact;
  if (name == "dense-approx") return IndexStrategy::DenseApprox;
  if (name == "hybrid") return IndexStrategy::Hybrid;
  throw Error(ErrorCode::InvalidConfig, "unknown index strategy '" + std::string(name) + "'");
}

namespace {

bool needs_lexical(IndexStrategy s) { return s == IndexStrategy::Lexical || s == IndexStrategy::Hybrid; }
bool needs_dense(IndexStrategy s) { return s != IndexStrategy::Lexical; }

void check_records(const std::vector<CorpusRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::EmptyCorpus, "source has no records");
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (r.doc_id.empty() || r.text.empty()) {
      throw Error(ErrorCode::ParseError, "records need a non-empty doc_id and text");
    }
    if (!seen.insert(r.doc_id).second) {
      throw Error(ErrorCode::DuplicateDoc, "doc_id '" + r.doc_id + "' appears more than once");
    }
  }
}

Evidence make_evidence(const IndexedSource& source, std::uint32_t doc, double score) {
  const auto& r = source.records()[doc];
  return {source.source_id(), r.doc_id, r.text, score, 0};
}

}  // namespace

std::shared_ptr<const IndexedSource> IndexedSource::build(std::string source_id, IndexStrategy strategy,
                                                          std::vector<CorpusRecord> records,
                                                          std::shared_ptr<const Embedder> embedder,
                                                          RetrievalParams params) {
  check_records(records);
  std::optional<LexicalIndex> lexical;
  if (needs_lexical(strategy)) lexical = LexicalIndex::build(records);
  std::optional<Eigen::MatrixXd> vectors;
  if (needs_dense(strategy)) {
    if (!embedder) throw Error(ErrorCode::InvalidConfig, "dense strategy requires an embedder");
    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const auto& r : records) texts.push_back(r.text);
    const auto embedded = embedder->embed_batch(texts);
    if (embedded.size() != records.size()) {
      throw Error(ErrorCode::EmbedderUnavailable, "embedder returned the wrong number of vectors");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(embedder->dim()), static_cast<Eigen::Index>(records.size()));
    for (std::size_t i = 0; i < embedded.size(); ++i) {
      if (embedded[i].size() != m.rows()) throw Error(ErrorCode::DimMismatch, "embedding has wrong dimension");
      m.col(static_cast<Eigen::Index>(i)) = embedded[i];
    }
    vectors = std::move(m);
  }
  return assemble(std::move(source_id), strategy, std::move(records), std::move(lexical), std::move(vectors),
                  std::move(embedder), params);
}

std::shared_ptr<const IndexedSource> IndexedSource::assemble(std::string source_id, IndexStrategy strategy,
                                                             std::vector<CorpusRecord> records,
                                                             std::optional<LexicalIndex> lexical,
                                                             std::optional<Eigen::MatrixXd> vectors,
                                                             std::shared_ptr<const Embedder> embedder,
                                                             RetrievalParams params) {
  if (source_id.empty()) throw Error(ErrorCode::InvalidConfig, "source_id must be non-empty");
  check_records(records);
  if (needs_lexical(strategy) && !lexical) {
    throw Error(ErrorCode::InvalidConfig, std::string(to_string(strategy)) + " source needs a lexical index");
  }
  if (needs_dense(strategy) && (!vectors || !embedder)) {
    throw Error(ErrorCode::InvalidConfig, std::string(to_string(strategy)) + " source needs vectors and an embedder");
  }
  if (lexical && lexical->doc_count() != records.size()) {
    throw Error(ErrorCode::InvalidConfig, "lexical index and records disagree on document count");
  }
  std::shared_ptr<IndexedSource> s(new IndexedSource());
  s->source_id_ = std::move(source_id);
  s->strategy_ = strategy;
  s->records_ = std::move(records);
  s->params_ = params;
  s->embedder_ = std::move(embedder);
  s->lexical_ = std::move(lexical);
  if (vectors) {
    if (static_cast<std::size_t>(vectors->cols()) != s->records_.size() ||
        static_cast<std::size_t>(vectors->rows()) != s->embedder_->dim()) {
      throw Error(ErrorCode::DimMismatch, "vector matrix shape does not match records and embed_dim");
    }
    s->finish_dense(std::move(*vectors));
  }
  return s;
}

void IndexedSource::finish_dense(Eigen::MatrixXd vectors) {
  vectors_ = std::make_unique<VectorStore>(vectors);
  raw_vectors_ = std::move(vectors);
  if (strategy_ != IndexStrategy::DenseExact && records_.size() >= params_.approx_threshold) {
    graph_ = std::make_unique<HnswIndex>(*vectors_, params_.hnsw);
  }
}

std::vector<Evidence> bm25_search(const IndexedSource& source, std::string_view query, std::size_t k) {
  const auto* index = source.lexical_index();
  if (!index) throw Error(ErrorCode::InvalidConfig, "source '" + source.source_id() + "' has no lexical index");
  const auto terms = tokenize(query);
  if (terms.empty()) throw Error(ErrorCode::EmptyQuery, "query has no searchable terms");
  std::vector<Evidence> out;
  for (const auto& [doc, score] : index->score(terms, source.params().bm25)) {
    out.push_back(make_evidence(source, doc, score));
  }
  rank_evidence(out, k);
  return out;
}

std::vector<Evidence> dense_search(const IndexedSource& source, const Eigen::VectorXd& query_vec, std::size_t k,
                                   DenseMode mode) {
  const auto* store = source.vector_store();
  if (!store) throw Error(ErrorCode::InvalidConfig, "source '" + source.source_id() + "' has no vector index");
  if (query_vec.size() != store->dim()) {
    throw Error(ErrorCode::DimMismatch, "query has dimension " + std::to_string(query_vec.size()) +
                                            ", source has " + std::to_string(store->dim()));
  }
  std::vector<Evidence> out;
  if (mode == DenseMode::Approx && source.has_graph()) {
    const Eigen::VectorXd q = query_vec / query_vec.norm();
    for (const auto& [doc, sim] : source.graph()->search(q, k)) out.push_back(make_evidence(source, doc, sim));
  } else {
    const Eigen::VectorXd sims = ExactVectorIndex(*store).similarities(query_vec);
    out.reserve(static_cast<std::size_t>(sims.size()));
    for (Eigen::Index d = 0; d < sims.size(); ++d) {
      out.push_back(make_evidence(source, static_cast<std::uint32_t>(d), sims[d]));
    }
  }
  rank_evidence(out, k);
  return out;
}

std::vector<Evidence> search_source(const IndexedSource& source, std::string_view query, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
  switch (source.strategy()) {
    case IndexStrategy::Lexical:
      return bm25_search(source, query, k);
    case IndexStrategy::DenseExact:
      return dense_search(source, source.embedder()->embed(query), k, DenseMode::Exact);
    case IndexStrategy::DenseApprox:
      return dense_search(source, source.embedder()->embed(query), k, DenseMode::Approx);
    case IndexStrategy::Hybrid: {
      const std::size_t depth = std::max(k, source.params().hybrid_depth);
      const std::vector<std::vector<Evidence>> lists{
          bm25_search(source, query, depth),
          dense_search(source, source.embedder()->embed(query), depth, DenseMode::Approx)};
      auto fused = fuse_rrf(lists, source.params().k_rrf);
      rank_evidence(fused, k);
      return fused;
    }
  }
  return {};
}

void SourceRegistry::add(std::shared_ptr<const IndexedSource> source) {
  if (!source) throw Error(ErrorCode::InvalidConfig, "null source");
  std::unique_lock lock(mu_);
  const auto id = source->source_id();
  sources_[id] = std::move(source);
  if (default_source_.empty()) default_source_ = id;
}

void SourceRegistry::set_default(const std::string& source_id) {
  std::unique_lock lock(mu_);
  if (!sources_.count(source_id)) throw Error(ErrorCode::UnknownSource, "no source '" + source_id + "'");
  default_source_ = source_id;
}

void SourceRegistry::add_alias(const std::string& tag, const std::string& source_id) {
  std::unique_lock lock(mu_);
  if (!sources_.count(source_id)) throw Error(ErrorCode::UnknownSource, "alias target '" + source_id + "'");
  aliases_[tag] = source_id;
}

std::shared_ptr<const IndexedSource> SourceRegistry::get(const std::string& source_id) const {
  std::shared_lock lock(mu_);
  const auto it = sources_.find(source_id);
  if (it == sources_.end()) throw Error(ErrorCode::UnknownSource, "no source '" + source_id + "'");
  return it->second;
}

bool SourceRegistry::contains(const std::string& source_id) const {
  std::shared_lock lock(mu_);
  return sources_.count(source_id) > 0;
}

std::vector<std::string> SourceRegistry::source_ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sources_) ids.push_back(id);
  return ids;
}

std::string SourceRegistry::default_source() const {
  std::shared_lock lock(mu_);
  return default_source_;
}

std::map<std::string, std::string> SourceRegistry::aliases() const {
  std::shared_lock lock(mu_);
  return aliases_;
}

std::optional<std::string> SourceRegistry::resolve_alias(const std::string& tag) const {
  std::shared_lock lock(mu_);
  const auto it = aliases_.find(tag);
  if (it == aliases_.end()) return std::nullopt;
  return it->second;
}

bool SourceRegistry::empty() const {
  std::shared_lock lock(mu_);
  return sources_.empty();
}

std::vector<Evidence> top_k(const SourceRegistry& registry, const std::string& source_id, std::string_view query,
                            std::size_t k) {
  return search_source(*registry.get(source_id), query, k);
}

RouteDecision route(const SourceRegistry& registry, const SearchAction& action) {
  if (action.source_tag) {
    if (auto target = registry.resolve_alias(*action.source_tag)) return {*target, false};
  }
  const auto fallback = registry.default_source();
  if (fallback.empty()) throw Error(ErrorCode::UnknownSource, "registry has no sources");
  return {fallback, true};
}

}  // namespace msr2
