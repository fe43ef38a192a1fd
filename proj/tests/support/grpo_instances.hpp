#pragma once

// Random inputs for the policy-optimization checks.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "msr2/grpo.hpp"
#include "oracles.hpp"

namespace msr2::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Random group of log-prob arrays. Each trajectory has at least one
/// generated token; roughly a third of tokens are environment tokens.
inline GroupSample<double> random_group_sample(Rng& rng, int G, bool exact_kl) {
  GroupSample<double> g;
  g.rewards.resize(G);
  for (int i = 0; i < G; ++i) g.rewards[i] = uniform(rng, 0, 1);
  for (int i = 0; i < G; ++i) {
    const int n = uniform_int(rng, 1, 24);
    TrajectoryLogProbs<double> tr{Vec<double>(n), Vec<double>(n), Vec<double>(n), GenMask(n), std::nullopt};
    for (int t = 0; t < n; ++t) {
      tr.logp_old[t] = uniform(rng, -4, -0.01);
      tr.logp_new[t] = tr.logp_old[t] + uniform(rng, -0.5, 0.5);
      tr.logp_ref[t] = tr.logp_old[t] + uniform(rng, -0.5, 0.5);
      tr.gen_mask[t] = uniform(rng, 0, 1) > 0.33;
    }
    tr.gen_mask[uniform_int(rng, 0, n - 1)] = true;
    if (exact_kl) {
      Vec<double> kl(n);
      for (int t = 0; t < n; ++t) kl[t] = uniform(rng, 0, 0.3);
      tr.kl = kl;
    }
    g.trajectories.push_back(std::move(tr));
  }
  return g;
}

inline std::vector<oracle::NaiveTrajectory> to_naive(const GroupSample<double>& g) {
  std::vector<oracle::NaiveTrajectory> out;
  for (const auto& tr : g.trajectories) {
    oracle::NaiveTrajectory n;
    for (Eigen::Index t = 0; t < tr.logp_new.size(); ++t) {
      n.logp_new.push_back(tr.logp_new[t]);
      n.logp_old.push_back(tr.logp_old[t]);
      n.logp_ref.push_back(tr.logp_ref[t]);
      n.generated.push_back(tr.gen_mask[t] ? 1 : 0);
    }
    if (tr.kl) n.kl = std::vector<double>(tr.kl->data(), tr.kl->data() + tr.kl->size());
    out.push_back(std::move(n));
  }
  return out;
}

inline std::vector<double> rewards_of(const GroupSample<double>& g) {
  return std::vector<double>(g.rewards.data(), g.rewards.data() + g.rewards.size());
}

/// Toy-policy instance for gradient checks: current, old and reference
/// policies plus a group of trajectories that mix free, forced and
/// environment tokens.
struct ToyInstance {
  ToyPolicy<double> policy;
  ToyPolicy<double> old_policy;
  ToyPolicy<double> ref_policy;
  std::vector<ToyTrajectory<double>> group;
};

inline ToyInstance random_toy_instance(Rng& rng, int G, int vocab, int features) {
  const auto random_matrix = [&](double scale) {
    Mat<double> W(vocab, features);
    for (int r = 0; r < vocab; ++r)
      for (int c = 0; c < features; ++c) W(r, c) = uniform(rng, -scale, scale);
    return W;
  };
  ToyInstance inst{ToyPolicy<double>(random_matrix(1.0)), ToyPolicy<double>(Mat<double>()),
                   ToyPolicy<double>(random_matrix(1.0)), {}};
  // pi_old near pi_theta so most ratios fall inside the clip range and the
  // clipped branch still shows up.
  inst.old_policy = ToyPolicy<double>(inst.policy.weights() + random_matrix(0.3));

  for (int i = 0; i < G; ++i) {
    ToyTrajectory<double> tr;
    tr.reward = uniform(rng, 0, 1);
    const int n = uniform_int(rng, 2, 12);
    bool any_free = false;
    for (int t = 0; t < n; ++t) {
      const double u = uniform(rng, 0, 1);
      if (u < 0.25 && t > 0) {
        tr.tokens.push_back(std::nullopt);  // environment token
        continue;
      }
      ToyDecision<double> d;
      d.features = Vec<double>(features);
      for (int f = 0; f < features; ++f) d.features[f] = uniform(rng, -1, 1);
      if (u < 0.35 && t > 0) {
        d.allowed = {uniform_int(rng, 0, vocab - 1)};  // forced token
      } else {
        const int m = uniform_int(rng, 2, vocab);
        std::vector<int> all(vocab);
        for (int k = 0; k < vocab; ++k) all[k] = k;
        std::shuffle(all.begin(), all.end(), rng);
        d.allowed.assign(all.begin(), all.begin() + m);
        any_free = true;
      }
      d.action = d.allowed[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(d.allowed.size()) - 1))];
      tr.tokens.push_back(std::move(d));
    }
    if (!any_free) {
      ToyDecision<double> d;
      d.features = Vec<double>::Ones(features);
      d.allowed = {0, 1};
      d.action = 1;
      tr.tokens.push_back(std::move(d));
    }
    inst.group.push_back(std::move(tr));
  }
  return inst;
}

/// Smallest distance of any generated-token ratio to a clip kink.
inline double distance_to_kink(const ToyInstance& inst, double eps_clip) {
  const auto sample = toy_group_sample(inst.policy, inst.old_policy, inst.ref_policy, inst.group);
  double best = 1e300;
  for (const auto& tr : sample.trajectories) {
    for (Eigen::Index t = 0; t < tr.logp_new.size(); ++t) {
      if (!tr.gen_mask[t]) continue;
      const double r = std::exp(tr.logp_new[t] - tr.logp_old[t]);
      best = std::min({best, std::abs(r - (1 - eps_clip)), std::abs(r - (1 + eps_clip))});
    }
  }
  return best;
}

/// Central differences of grpo_loss with respect to every policy weight.
inline Mat<double> finite_difference_grad(const ToyInstance& inst, const GrpoConfig& config, double h) {
  Mat<double> grad(inst.policy.vocab(), inst.policy.feature_dim());
  for (Eigen::Index r = 0; r < grad.rows(); ++r) {
    for (Eigen::Index c = 0; c < grad.cols(); ++c) {
      ToyPolicy<double> plus = inst.policy, minus = inst.policy;
      plus.weights()(r, c) += h;
      minus.weights()(r, c) -= h;
      const double fp = grpo_loss(toy_group_sample(plus, inst.old_policy, inst.ref_policy, inst.group), config).objective;
      const double fm =
          grpo_loss(toy_group_sample(minus, inst.old_policy, inst.ref_policy, inst.group), config).objective;
      grad(r, c) = (fp - fm) / (2 * h);
    }
  }
  return grad;
}

/// max |analytic - numeric| / max |numeric| (entrywise max norm).
inline double max_relative_error(const Mat<double>& analytic, const Mat<double>& numeric) {
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

}  // namespace msr2::testing
