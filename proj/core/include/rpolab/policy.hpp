#pragma once

#include <cstdint>
#include <vector>

#include "rpolab/grid.hpp"
#include "rpolab/reward.hpp"

namespace rpolab {

struct BanditInstance;
struct PreferenceDataset;

// Distribution over prompts.  Weights are nonnegative and sum to 1
// within 1e-12.
struct PromptDistribution {
  std::vector<double> w;

  PromptDistribution() = default;
  explicit PromptDistribution(std::vector<double> weights) : w(std::move(weights)) { validate(); }

  int num_prompts() const { return static_cast<int>(w.size()); }
  double at(int x) const { return w[static_cast<std::size_t>(x)]; }
  void validate() const;

  static PromptDistribution uniform(int num_prompts);
};

// Per-prompt categorical policy over responses, stored as logits plus a
// support mask.  Masked-out responses have probability exactly 0 and take
// no part in normalization.  Optionally the logits are generated by a
// linear feature model, logits(x,a) = features(x,a,:) . theta, which caps
// the policy class at rank `feature_dim` instead of full tabular rank.
class TabularPolicy {
 public:
  Grid logits;                    // num_prompts x num_responses
  std::vector<std::uint8_t> support;  // row-major, same shape as logits

  // Optional linear parametrization (empty when tabular).
  std::vector<double> features;   // num_prompts * num_responses * feature_dim
  std::vector<double> theta;      // feature_dim

  TabularPolicy() = default;

  int num_prompts() const { return logits.rows; }
  int num_responses() const { return logits.cols; }
  bool supported(int x, int a) const {
    return support[static_cast<std::size_t>(x) * logits.cols + a] != 0;
  }
  bool feature_limited() const { return !theta.empty(); }
  int feature_dim() const { return static_cast<int>(theta.size()); }
  double feature(int x, int a, int j) const {
    return features[(static_cast<std::size_t>(x) * logits.cols + a) * theta.size() + j];
  }

  // Masked softmax of row x.  Entries off support are exactly 0.
  std::vector<double> probs(int x) const;
  // Natural-log row probabilities; -inf off support.
  std::vector<double> log_probs(int x) const;

  // Replace theta and recompute all logits (feature-limited policies only).
  void set_theta(const std::vector<double>& new_theta);

  void validate() const;

  static TabularPolicy uniform(int num_prompts, int num_responses);
  // Support is taken to be the strictly positive entries; each row must
  // sum to 1 within 1e-12.
  static TabularPolicy from_probs(const Grid& p);
  static TabularPolicy from_logits(Grid logits, std::vector<std::uint8_t> support);
  static TabularPolicy from_features(int num_prompts, int num_responses, int feature_dim,
                                     std::vector<double> features, std::vector<double> theta,
                                     std::vector<std::uint8_t> support);
};

// KL(pol(.|x) || ref(.|x)) in nats.  Requires supp(pol) within supp(ref)
// at x; throws std::domain_error otherwise.
double kl_to_ref(const TabularPolicy& pol, const TabularPolicy& ref, int x);

struct KlOptimalPolicy {
  TabularPolicy policy;
  std::vector<double> log_partition;  // per-prompt ln Z
};

// The KL-regularized best response to a fixed reward: per prompt,
// policy(a|x) proportional to ref(a|x) * exp(r(x,a)/beta) on ref's support.
// log_partition[x] is the attained per-prompt objective divided by beta.
KlOptimalPolicy optimal_kl_policy(const RewardTable& r, const TabularPolicy& ref, double beta);

// Reward recovered from a policy shift: beta * (ln pol - ln ref) on ref's
// support, 0 elsewhere.  The per-prompt additive constant is dropped, so
// this inverts optimal_kl_policy only up to that constant.
Grid implicit_reward(const TabularPolicy& pol, const TabularPolicy& ref, double beta);

// Expected true reward of `pol` under prompt distribution `d`.
double value(const TabularPolicy& pol, const BanditInstance& inst, const PromptDistribution& d);

// value(comparator) - value(pol_hat).
double gap(const TabularPolicy& pol_hat, const TabularPolicy& comparator, const BanditInstance& inst,
           const PromptDistribution& d);

// Empirical distribution of preferred responses per prompt with additive
// smoothing on the reference support; prompts absent from the data fall
// back to the reference row.  smoothing = 0 narrows support to responses
// actually preferred.  `pool_prompts` shares one pooled distribution
// across all prompts instead of conditioning on the prompt.
TabularPolicy chosen_policy(const PreferenceDataset& data, const BanditInstance& inst,
                            double smoothing, bool pool_prompts = false);

// Deterministic comparator: per prompt, a point mass on the true-reward
// argmax within the reference support, ties to the lowest index.
TabularPolicy argmax_policy(const BanditInstance& inst);

}  // namespace rpolab
