#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace msr2 {

using ScoredId = std::pair<std::uint32_t, double>;

/// Column-major store of unit-normalized vectors (one column per document).
/// Construction normalizes the input columns and rejects zero vectors.
class VectorStore {
 public:
  VectorStore() = default;
  explicit VectorStore(const Eigen::MatrixXd& columns);

  Eigen::Index dim() const { return unit_.rows(); }
  std::size_t size() const { return static_cast<std::size_t>(unit_.cols()); }
  const Eigen::MatrixXd& unit_vectors() const { return unit_; }
  const Eigen::VectorXd& norms() const { return norms_; }

  double cosine(std::uint32_t id, const Eigen::VectorXd& unit_query) const {
    return unit_.col(id).dot(unit_query);
  }

 private:
  Eigen::MatrixXd unit_;
  Eigen::VectorXd norms_;
};

/// Brute-force cosine scan.
class ExactVectorIndex {
 public:
  explicit ExactVectorIndex(const VectorStore& store) : store_(&store) {}

  /// Cosine similarity of every stored vector against the query.
  Eigen::VectorXd similarities(const Eigen::VectorXd& query) const;

 private:
  const VectorStore* store_;
};

struct HnswParams {
  int degree = 16;            // M: links per node above layer 0 (2M on layer 0)
  int ef_construction = 200;
  int ef_search = 128;
  std::uint64_t seed = 0x5eed;
};

/// Hierarchical navigable-small-world graph over cosine similarity.
/// Built once; searches are const and safe to run concurrently.
class HnswIndex {
 public:
  HnswIndex(const VectorStore& store, HnswParams params);

  /// Approximate top-k by cosine, best first. Beam width is max(ef, k).
  std::vector<ScoredId> search(const Eigen::VectorXd& unit_query, std::size_t k, int ef = 0) const;

  int max_level() const { return max_level_; }
  const HnswParams& params() const { return params_; }

 private:
  using Links = std::vector<std::uint32_t>;

  std::vector<ScoredId> search_layer(const Eigen::VectorXd& q, const std::vector<ScoredId>& entry, int ef,
                                     int level) const;
  std::vector<std::uint32_t> select_neighbors(const std::vector<ScoredId>& candidates, std::size_t m) const;
  void insert(std::uint32_t id, int level);
  std::size_t max_links(int level) const;

  const VectorStore* store_;
  HnswParams params_;
  std::vector<std::vector<Links>> links_;  // links_[node][level]
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
};

}  // namespace msr2
