#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace msr2 {

/// Text -> dense vector contract shared by the local mock and remote clients.
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::size_t dim() const = 0;
  virtual Eigen::VectorXd embed(std::string_view text) const = 0;
  virtual std::vector<Eigen::VectorXd> embed_batch(std::span<const std::string> texts) const;
  /// Stable name recorded in index manifests ("hashing", "remote").
  virtual std::string kind() const = 0;
};

inline constexpr std::size_t kDefaultEmbedDim = 1024;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Feature hashing over tokenize() terms: each term adds +1 or -1 to one
/// bucket, then the vector is L2-normalized. A text whose buckets cancel (or
/// that has no terms) falls back to a single bucket chosen from its raw bytes.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = kDefaultEmbedDim);

  std::size_t dim() const override { return dim_; }
  Eigen::VectorXd embed(std::string_view text) const override;
  std::string kind() const override { return "hashing"; }

  /// Bucket and sign a term is hashed to.
  std::pair<std::size_t, double> bucket(std::string_view term) const;

 private:
  std::size_t dim_;
};

}  // namespace msr2
