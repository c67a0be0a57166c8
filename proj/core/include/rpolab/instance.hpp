#pragma once

#include <utility>
#include <vector>

#include "rpolab/policy.hpp"
#include "rpolab/reward.hpp"

namespace rpolab {

// How comparison data is collected: which prompt shows up and which ordered
// response pair (a1, a0) gets compared.  Together these define the pair
// distribution mu(x, a1, a0) used for exact second-moment computations.
struct BehaviorSpec {
  enum class Kind {
    // Draw a1 and a0 i.i.d. from `policy` given x, rejecting a1 == a0.
    IidPolicy,
    // Always compare the fixed ordered pair `pairs[x]`.
    FixedPairs,
  };

  Kind kind = Kind::IidPolicy;
  PromptDistribution prompt_weights;
  TabularPolicy policy;                       // IidPolicy only
  std::vector<std::pair<int, int>> pairs;     // FixedPairs only, one per prompt
};

// A finite preference-learning environment: true rewards, reference policy,
// prompt distribution, and the data-collection behavior.
struct BanditInstance {
  int num_prompts = 0;
  int num_responses = 0;
  RewardTable true_reward;
  TabularPolicy reference_policy;
  PromptDistribution d0;
  BehaviorSpec behavior;

  void validate() const;

  // Probability that one collected comparison equals (x, a1, a0).
  double pair_prob(int x, int a1, int a0) const;

  // Convenience constructor for the common case: behavior draws prompts
  // from d0 and response pairs i.i.d. from the reference policy.
  static BanditInstance make(RewardTable r, TabularPolicy ref, PromptDistribution d0);
};

}  // namespace rpolab
