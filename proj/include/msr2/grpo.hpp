#pragma once

// Group-relative policy optimization: per-group reward normalization,
// environment-token masking, clipped likelihood-ratio surrogate and a KL
// penalty toward a reference policy, all length-normalized per trajectory.
// Templated on the scalar type; a small softmax policy makes the objective
// and its gradient checkable end to end.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "msr2/error.hpp"

namespace msr2 {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
/// 1 = generated by the policy, 0 = inserted by the environment.
using GenMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

enum class KlEstimator {
  /// Per-token categorical KL supplied by the caller (full distributions known).
  Exact,
  /// exp(ref - new) - (ref - new) - 1 from sampled log-probs.
  K3,
};

inline std::string_view to_string(KlEstimator e) { return e == KlEstimator::Exact ? "exact" : "k3"; }

struct GrpoConfig {
  int group_size_G = 8;
  double eps_std = 1e-6;
  double eps_clip = 0.2;
  double beta_kl = 1e-3;
  double learning_rate = 1e-6;

  void validate() const {
    if (group_size_G < 2) throw Error(ErrorCode::InvalidConfig, "group_size_G must be at least 2");
    if (!(eps_std > 0)) throw Error(ErrorCode::InvalidConfig, "eps_std must be positive");
    if (!(eps_clip > 0 && eps_clip < 1)) throw Error(ErrorCode::InvalidConfig, "eps_clip must lie in (0, 1)");
    if (!(beta_kl >= 0)) throw Error(ErrorCode::InvalidConfig, "beta_kl must be non-negative");
    if (!(learning_rate > 0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
  }
};

/// Per-token arrays of one trajectory.
template <typename Scalar>
struct TrajectoryLogProbs {
  Vec<Scalar> logp_new;
  Vec<Scalar> logp_old;
  Vec<Scalar> logp_ref;
  GenMask gen_mask;
  /// Per-token KL(pi_theta || pi_ref); when absent the K3 estimator is used.
  std::optional<Vec<Scalar>> kl;
};

template <typename Scalar>
struct GroupSample {
  Vec<Scalar> rewards;
  std::vector<TrajectoryLogProbs<Scalar>> trajectories;
};

template <typename Scalar>
struct GrpoDiagnostics {
  Vec<Scalar> advantages;
  std::vector<Vec<Scalar>> ratios;
  /// min(r A, clip(r) A) - beta KL per token; 0 on environment tokens.
  std::vector<Vec<Scalar>> token_terms;
  std::vector<Eigen::Index> generated_counts;
  Scalar mean_kl = 0;
  Scalar clip_fraction = 0;
  KlEstimator kl_estimator = KlEstimator::K3;
};

template <typename Scalar>
struct GrpoLoss {
  /// To be maximized.
  Scalar objective = 0;
  GrpoDiagnostics<Scalar> diagnostics;
};

// ---------------------------------------------------------------------------

/// (R_i - mean) / (population std + eps_std).
template <typename Scalar>
Vec<Scalar> group_advantages(const Vec<Scalar>& rewards, Scalar eps_std) {
  if (rewards.size() < 2) throw Error(ErrorCode::GroupTooSmall, "group needs at least two rewards");
  // A rounded mean need not equal the common value, so exact ties are handled here.
  if ((rewards.array() == rewards[0]).all()) return Vec<Scalar>::Zero(rewards.size());
  const Scalar mean = rewards.mean();
  const Vec<Scalar> centered = rewards.array() - mean;
  const Scalar sigma = std::sqrt(centered.squaredNorm() / static_cast<Scalar>(rewards.size()));
  return centered / (sigma + eps_std);
}

template <typename Scalar>
Vec<Scalar> token_advantages(Scalar advantage, const GenMask& gen_mask) {
  return gen_mask.cast<Scalar>().matrix() * advantage;
}

/// exp(new - old) on generated tokens, 1 on environment tokens.
template <typename Scalar>
Vec<Scalar> likelihood_ratios(const Vec<Scalar>& logp_new, const Vec<Scalar>& logp_old, const GenMask& gen_mask) {
  if (logp_new.size() != logp_old.size() || logp_new.size() != gen_mask.size()) {
    throw Error(ErrorCode::InvalidConfig, "log-prob arrays and mask differ in length");
  }
  Vec<Scalar> r = Vec<Scalar>::Ones(logp_new.size());
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    if (!gen_mask[t]) continue;
    if (!std::isfinite(logp_new[t]) || !std::isfinite(logp_old[t])) {
      throw Error(ErrorCode::NonFiniteLogProb, "token " + std::to_string(t) + " has a non-finite log-prob");
    }
    r[t] = std::exp(logp_new[t] - logp_old[t]);
  }
  return r;
}

/// Sum p log(p / q) over a categorical support. Throws InfiniteKL when q
/// vanishes where p does not.
template <typename Scalar>
Scalar kl_per_token(const Vec<Scalar>& p, const Vec<Scalar>& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::DimMismatch, "distributions differ in size");
  Scalar kl = 0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p[k] <= 0) continue;
    if (q[k] <= 0) throw Error(ErrorCode::InfiniteKL, "reference assigns zero mass to symbol " + std::to_string(k));
    kl += p[k] * (std::log(p[k]) - std::log(q[k]));
  }
  return kl;
}

template <typename Scalar>
Scalar kl_k3(Scalar logp_new, Scalar logp_ref) {
  const Scalar d = logp_ref - logp_new;
  return std::exp(d) - d - 1;
}

/// Clipped surrogate with KL penalty, averaged over each trajectory's
/// generated tokens and then over the group. Environment tokens are skipped
/// entirely, so their log-probs cannot influence the result.
template <typename Scalar>
GrpoLoss<Scalar> grpo_loss(const GroupSample<Scalar>& group, const GrpoConfig& config) {
  const auto G = static_cast<Eigen::Index>(group.trajectories.size());
  if (group.rewards.size() != G) throw Error(ErrorCode::InvalidConfig, "rewards and trajectories differ in count");
  GrpoLoss<Scalar> out;
  auto& d = out.diagnostics;
  d.advantages = group_advantages<Scalar>(group.rewards, static_cast<Scalar>(config.eps_std));
  const Scalar lo = 1 - static_cast<Scalar>(config.eps_clip);
  const Scalar hi = 1 + static_cast<Scalar>(config.eps_clip);
  const Scalar beta = static_cast<Scalar>(config.beta_kl);

  Scalar total = 0, kl_sum = 0;
  Eigen::Index clipped = 0, generated = 0;
  bool any_exact = false;
  for (Eigen::Index i = 0; i < G; ++i) {
    const auto& tr = group.trajectories[static_cast<std::size_t>(i)];
    const Eigen::Index n = tr.logp_new.size();
    if (tr.logp_ref.size() != n || (tr.kl && tr.kl->size() != n)) {
      throw Error(ErrorCode::InvalidConfig, "trajectory " + std::to_string(i) + " arrays differ in length");
    }
    const Eigen::Index Z = tr.gen_mask.count();
    if (Z == 0) throw Error(ErrorCode::DegenerateTrajectory, "trajectory " + std::to_string(i) + " has no generated tokens");
    const Vec<Scalar> r = likelihood_ratios<Scalar>(tr.logp_new, tr.logp_old, tr.gen_mask);
    Vec<Scalar> terms = Vec<Scalar>::Zero(n);
    const Scalar A = d.advantages[i];
    Scalar traj_sum = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!tr.gen_mask[t]) continue;
      const Scalar unclipped = r[t] * A;
      const Scalar clipped_term = std::clamp(r[t], lo, hi) * A;
      if (clipped_term < unclipped) ++clipped;
      Scalar kl;
      if (tr.kl) {
        kl = (*tr.kl)[t];
        any_exact = true;
      } else {
        if (!std::isfinite(tr.logp_ref[t])) {
          throw Error(ErrorCode::NonFiniteLogProb, "reference log-prob at token " + std::to_string(t));
        }
        kl = kl_k3<Scalar>(tr.logp_new[t], tr.logp_ref[t]);
      }
      terms[t] = std::min(unclipped, clipped_term) - beta * kl;
      traj_sum += terms[t];
      kl_sum += kl / static_cast<Scalar>(Z);
    }
    total += traj_sum / static_cast<Scalar>(Z);
    generated += Z;
    d.ratios.push_back(r);
    d.token_terms.push_back(std::move(terms));
    d.generated_counts.push_back(Z);
  }
  out.objective = total / static_cast<Scalar>(G);
  d.mean_kl = kl_sum / static_cast<Scalar>(G);
  d.clip_fraction = generated ? static_cast<Scalar>(clipped) / static_cast<Scalar>(generated) : Scalar(0);
  d.kl_estimator = any_exact ? KlEstimator::Exact : KlEstimator::K3;
  return out;
}

/// d(token term)/d(logp_new): A r on the unclipped branch, 0 when the clip
/// is active.
template <typename Scalar>
Scalar surrogate_slope(Scalar ratio, Scalar advantage, Scalar eps_clip) {
  const Scalar clipped = std::clamp(ratio, 1 - eps_clip, 1 + eps_clip) * advantage;
  return clipped < ratio * advantage ? Scalar(0) : advantage * ratio;
}

// ---------------------------------------------------------------------------
// Toy policy

/// One sampling decision: context features, the symbols decoding may choose
/// from, and the symbol chosen. A single allowed symbol is a forced token.
template <typename Scalar>
struct ToyDecision {
  Vec<Scalar> features;
  std::vector<int> allowed;
  int action = 0;
};

/// Per token: a decision for generated tokens, nullopt for environment ones.
template <typename Scalar>
struct ToyTrajectory {
  std::vector<std::optional<ToyDecision<Scalar>>> tokens;
  Scalar reward = 0;

  GenMask gen_mask() const {
    GenMask m(static_cast<Eigen::Index>(tokens.size()));
    for (std::size_t t = 0; t < tokens.size(); ++t) m[static_cast<Eigen::Index>(t)] = tokens[t].has_value();
    return m;
  }
};

/// Logits W * features, softmax over the allowed symbols at temperature 1.
template <typename Scalar>
class ToyPolicy {
 public:
  ToyPolicy(Eigen::Index vocab, Eigen::Index features) : W_(Mat<Scalar>::Zero(vocab, features)) {
    if (vocab <= 0 || vocab > 64) throw Error(ErrorCode::InvalidConfig, "toy vocabulary must have 1..64 symbols");
  }
  explicit ToyPolicy(Mat<Scalar> W) : W_(std::move(W)) {}

  Eigen::Index vocab() const { return W_.rows(); }
  Eigen::Index feature_dim() const { return W_.cols(); }
  const Mat<Scalar>& weights() const { return W_; }
  Mat<Scalar>& weights() { return W_; }

  /// Full-vocabulary distribution; zero outside `allowed`.
  Vec<Scalar> distribution(const Vec<Scalar>& features, const std::vector<int>& allowed) const {
    if (features.size() != W_.cols()) throw Error(ErrorCode::DimMismatch, "feature vector has the wrong size");
    if (allowed.empty()) throw Error(ErrorCode::InvalidConfig, "decision allows no symbol");
    const Vec<Scalar> logits = W_ * features;
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (const int k : allowed) m = std::max(m, logits[k]);
    Vec<Scalar> p = Vec<Scalar>::Zero(W_.rows());
    Scalar z = 0;
    for (const int k : allowed) {
      p[k] = std::exp(logits[k] - m);
      z += p[k];
    }
    return p / z;
  }

  Scalar log_prob(const ToyDecision<Scalar>& d) const {
    if (d.allowed.size() == 1) return 0;
    return std::log(distribution(d.features, d.allowed)[d.action]);
  }

  template <typename Rng>
  int sample(const Vec<Scalar>& features, const std::vector<int>& allowed, Rng& rng) const {
    if (allowed.size() == 1) return allowed.front();
    const Vec<Scalar> p = distribution(features, allowed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng), acc = 0.0;
    for (const int k : allowed) {
      acc += static_cast<double>(p[k]);
      if (x < acc) return k;
    }
    return allowed.back();
  }

 private:
  Mat<Scalar> W_;
};

/// Builds the loss input for toy trajectories: new/ref log-probs and exact
/// KL from the current and reference policies, old log-probs from pi_old.
template <typename Scalar>
GroupSample<Scalar> toy_group_sample(const ToyPolicy<Scalar>& policy, const ToyPolicy<Scalar>& old_policy,
                                     const ToyPolicy<Scalar>& ref_policy,
                                     const std::vector<ToyTrajectory<Scalar>>& group) {
  GroupSample<Scalar> out;
  out.rewards.resize(static_cast<Eigen::Index>(group.size()));
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& tr = group[i];
    out.rewards[static_cast<Eigen::Index>(i)] = tr.reward;
    const auto n = static_cast<Eigen::Index>(tr.tokens.size());
    TrajectoryLogProbs<Scalar> lp{Vec<Scalar>::Zero(n), Vec<Scalar>::Zero(n), Vec<Scalar>::Zero(n), tr.gen_mask(),
                                  Vec<Scalar>::Zero(n)};
    for (Eigen::Index t = 0; t < n; ++t) {
      const auto& d = tr.tokens[static_cast<std::size_t>(t)];
      if (!d) continue;
      if (d->allowed.size() == 1) continue;  // forced: log-prob 0, KL 0
      const Vec<Scalar> p = policy.distribution(d->features, d->allowed);
      const Vec<Scalar> q = ref_policy.distribution(d->features, d->allowed);
      lp.logp_new[t] = std::log(p[d->action]);
      lp.logp_old[t] = old_policy.log_prob(*d);
      lp.logp_ref[t] = std::log(q[d->action]);
      (*lp.kl)[t] = kl_per_token<Scalar>(p, q);
    }
    out.trajectories.push_back(std::move(lp));
  }
  return out;
}

/// Analytic gradient of grpo_loss(toy_group_sample(policy, ...)) with
/// respect to the policy weights.
template <typename Scalar>
Mat<Scalar> policy_grad(const ToyPolicy<Scalar>& policy, const ToyPolicy<Scalar>& old_policy,
                        const ToyPolicy<Scalar>& ref_policy, const std::vector<ToyTrajectory<Scalar>>& group,
                        const GrpoConfig& config) {
  const auto sample = toy_group_sample(policy, old_policy, ref_policy, group);
  const auto loss = grpo_loss(sample, config);
  const auto& adv = loss.diagnostics.advantages;
  const Scalar eps = static_cast<Scalar>(config.eps_clip);
  const Scalar beta = static_cast<Scalar>(config.beta_kl);
  const Scalar G = static_cast<Scalar>(group.size());

  Mat<Scalar> grad = Mat<Scalar>::Zero(policy.vocab(), policy.feature_dim());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& tr = group[i];
    const auto& r = loss.diagnostics.ratios[i];
    const Scalar scale = 1 / (static_cast<Scalar>(loss.diagnostics.generated_counts[i]) * G);
    for (std::size_t t = 0; t < tr.tokens.size(); ++t) {
      const auto& d = tr.tokens[t];
      if (!d || d->allowed.size() == 1) continue;
      const Vec<Scalar> p = policy.distribution(d->features, d->allowed);
      const Vec<Scalar> q = ref_policy.distribution(d->features, d->allowed);
      const Scalar slope = surrogate_slope(r[static_cast<Eigen::Index>(t)], adv[static_cast<Eigen::Index>(i)], eps);
      const Scalar kl = kl_per_token<Scalar>(p, q);
      // d/dlogits of (slope * logp_a - beta * KL), restricted to allowed symbols.
      Vec<Scalar> g = Vec<Scalar>::Zero(policy.vocab());
      for (const int k : d->allowed) {
        const Scalar dlogp = (k == d->action ? Scalar(1) : Scalar(0)) - p[k];
        const Scalar dkl = p[k] * (std::log(p[k]) - std::log(q[k]) - kl);
        g[k] = slope * dlogp - beta * dkl;
      }
      grad.noalias() += scale * g * d->features.transpose();
    }
  }
  return grad;
}

/// One ascent step W += lr * grad. Throws Divergence on non-finite weights.
template <typename Scalar>
void apply_gradient(ToyPolicy<Scalar>& policy, const Mat<Scalar>& grad, Scalar learning_rate) {
  policy.weights() += learning_rate * grad;
  if (!policy.weights().allFinite()) {
    throw Error(ErrorCode::Divergence, "policy weights became non-finite (grad max |g| = " +
                                           std::to_string(static_cast<double>(grad.cwiseAbs().maxCoeff())) + ")");
  }
}

}  // namespace msr2
