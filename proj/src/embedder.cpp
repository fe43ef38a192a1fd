#include "msr2/embedder.hpp"

#include "msr2/error.hpp"
#include "msr2/text_tokenizer.hpp"

namespace msr2 {

std::vector<Eigen::VectorXd> Embedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw Error(ErrorCode::InvalidConfig, "embedding dimension must be positive");
}

std::pair<std::size_t, double> HashingEmbedder::bucket(std::string_view term) const {
  const auto h = fnv1a64(term);
  return {static_cast<std::size_t>(h % dim_), ((h >> 32) & 1u) ? -1.0 : 1.0};
}

Eigen::VectorXd HashingEmbedder::embed(std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::EmbedderUnavailable, "cannot embed empty text");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (const auto& term : tokenize(text)) {
    const auto [b, sign] = bucket(term);
    v[static_cast<Eigen::Index>(b)] += sign;
  }
  const double n = v.norm();
  if (n == 0.0) {
    v.setZero();
    v[static_cast<Eigen::Index>(fnv1a64(text) % dim_)] = 1.0;
    return v;
  }
  return v / n;
}

}  // namespace msr2
