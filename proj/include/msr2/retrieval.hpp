#pragma once

// Per-source indexes, top-k retrieval with the source's strategy, and
// action-space routing from a search tag to a registered source.

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "msr2/corpus.hpp"
#include "msr2/embedder.hpp"
#include "msr2/fusion.hpp"
#include "msr2/lexical_index.hpp"
#include "msr2/tag_protocol.hpp"
#include "msr2/vector_index.hpp"

namespace msr2 {

enum class IndexStrategy { Lexical, DenseExact, DenseApprox, Hybrid };

std::string_view to_string(IndexStrategy strategy);
IndexStrategy index_strategy_from_string(std::string_view name);

enum class DenseMode { Exact, Approx };

inline constexpr std::size_t kDefaultTopK = 3;

struct RetrievalParams {
  Bm25Params bm25;
  int k_rrf = kDefaultRrfK;
  /// Depth of each list fed into fusion for hybrid sources.
  std::size_t hybrid_depth = 100;
  HnswParams hnsw;
  /// DenseApprox sources smaller than this keep only the exact index.
  std::size_t approx_threshold = 10000;
};

/// One retrieval source. Immutable after build; share it via shared_ptr.
class IndexedSource {
 public:
  static std::shared_ptr<const IndexedSource> build(std::string source_id, IndexStrategy strategy,
                                                    std::vector<CorpusRecord> records,
                                                    std::shared_ptr<const Embedder> embedder,
                                                    RetrievalParams params = {});

  /// Reassembles a source from persisted parts (see index_store.hpp).
  static std::shared_ptr<const IndexedSource> assemble(std::string source_id, IndexStrategy strategy,
                                                       std::vector<CorpusRecord> records,
                                                       std::optional<LexicalIndex> lexical,
                                                       std::optional<Eigen::MatrixXd> vectors,
                                                       std::shared_ptr<const Embedder> embedder,
                                                       RetrievalParams params);

  IndexedSource(const IndexedSource&) = delete;
  IndexedSource& operator=(const IndexedSource&) = delete;

  const std::string& source_id() const { return source_id_; }
  IndexStrategy strategy() const { return strategy_; }
  const std::vector<CorpusRecord>& records() const { return records_; }
  const RetrievalParams& params() const { return params_; }
  std::size_t embed_dim() const { return embedder_ ? embedder_->dim() : 0; }
  const Embedder* embedder() const { return embedder_.get(); }

  const LexicalIndex* lexical_index() const { return lexical_ ? &*lexical_ : nullptr; }
  const VectorStore* vector_store() const { return vectors_ ? vectors_.get() : nullptr; }
  /// Raw embeddings as produced by the embedder (columns), for persistence.
  const Eigen::MatrixXd* raw_vectors() const { return raw_vectors_ ? &*raw_vectors_ : nullptr; }
  bool has_graph() const { return graph_ != nullptr; }
  const HnswIndex* graph() const { return graph_.get(); }

 private:
  IndexedSource() = default;
  void finish_dense(Eigen::MatrixXd vectors);

  std::string source_id_;
  IndexStrategy strategy_ = IndexStrategy::Lexical;
  std::vector<CorpusRecord> records_;
  RetrievalParams params_;
  std::shared_ptr<const Embedder> embedder_;
  std::optional<LexicalIndex> lexical_;
  std::optional<Eigen::MatrixXd> raw_vectors_;
  std::unique_ptr<VectorStore> vectors_;
  std::unique_ptr<HnswIndex> graph_;
};

/// Okapi BM25 over the source's lexical index. Throws EmptyQuery when the
/// query has no terms.
std::vector<Evidence> bm25_search(const IndexedSource& source, std::string_view query, std::size_t k);

/// Cosine search. Approx mode uses the navigable-small-world graph when the
/// source has one and falls back to the exact scan otherwise.
std::vector<Evidence> dense_search(const IndexedSource& source, const Eigen::VectorXd& query_vec, std::size_t k,
                                   DenseMode mode);

/// Top-k retrieval with the source's own strategy.
std::vector<Evidence> search_source(const IndexedSource& source, std::string_view query, std::size_t k);

struct RouteDecision {
  std::string source_id;
  /// Set when the tag was absent or unknown and the default source was used.
  bool warning = false;
};

/// Thread-safe set of sources. Readers take shared_ptr snapshots, so a
/// rebuild can replace a source while queries against the old one finish.
class SourceRegistry {
 public:
  void add(std::shared_ptr<const IndexedSource> source);
  void set_default(const std::string& source_id);
  void add_alias(const std::string& tag, const std::string& source_id);

  std::shared_ptr<const IndexedSource> get(const std::string& source_id) const;
  bool contains(const std::string& source_id) const;
  std::vector<std::string> source_ids() const;
  std::string default_source() const;
  std::map<std::string, std::string> aliases() const;
  std::optional<std::string> resolve_alias(const std::string& tag) const;
  bool empty() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const IndexedSource>> sources_;
  std::map<std::string, std::string> aliases_;
  std::string default_source_;
};

/// Dispatches a query to a registered source. Throws UnknownSource.
std::vector<Evidence> top_k(const SourceRegistry& registry, const std::string& source_id, std::string_view query,
                            std::size_t k = kDefaultTopK);

/// Tag -> source via the alias table; absent or unknown tags go to the
/// default source with a warning.
RouteDecision route(const SourceRegistry& registry, const SearchAction& action);

}  // namespace msr2
