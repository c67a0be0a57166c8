#pragma once

// Shared fixtures for the unit tests: canonical instances, seeded random
// generators, and finite-difference utilities for gradient checks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "rpolab/instance.hpp"
#include "rpolab/policy.hpp"
#include "rpolab/preference.hpp"
#include "rpolab/reward.hpp"
#include "rpolab/rng.hpp"

namespace rpolab::testing {

// Single-prompt, three-response showcase environment: true rewards
// (1, 0.5, 0) and reference probabilities (0.45, 0.45, 0.1).  The best
// response has the most reference mass; the worst keeps a little.
inline BanditInstance three_response_instance() {
  Grid r(1, 3);
  r.at(0, 0) = 1.0;
  r.at(0, 1) = 0.5;
  r.at(0, 2) = 0.0;
  Grid p(1, 3);
  p.at(0, 0) = 0.45;
  p.at(0, 1) = 0.45;
  p.at(0, 2) = 0.10;
  return BanditInstance::make(RewardTable(std::move(r), 1.0), TabularPolicy::from_probs(p),
                              PromptDistribution::uniform(1));
}

// The single comparison "response 0 preferred over response 1".
inline PreferenceDataset one_comparison() {
  PreferenceDataset d;
  d.triples = {{0, 0, 1, 1}};
  return d;
}

// Flat Dirichlet draw: normalized unit exponentials.
inline std::vector<double> random_simplex(SplitMix64& rng, int m) {
  std::vector<double> p(static_cast<std::size_t>(m));
  double s = 0.0;
  for (double& q : p) {
    q = -std::log(1.0 - rng.next_double());
    s += q;
  }
  for (double& q : p) q /= s;
  return p;
}

// Full-support policy with Dirichlet rows.
inline TabularPolicy random_policy(SplitMix64& rng, int k, int m) {
  Grid p(k, m);
  for (int x = 0; x < k; ++x) {
    const std::vector<double> row = random_simplex(rng, m);
    for (int a = 0; a < m; ++a) p.at(x, a) = row[a];
  }
  return TabularPolicy::from_probs(p);
}

// Uniform entries in [margin, bound - margin]; a positive margin keeps
// finite-difference probes inside the box.
inline RewardTable random_reward(SplitMix64& rng, int k, int m, double bound,
                                 double margin = 0.0) {
  Grid g(k, m);
  for (double& v : g.v) v = margin + (bound - 2.0 * margin) * rng.next_double();
  return RewardTable(std::move(g), bound);
}

// Dense random environment with uniform prompt weights and reference-policy
// data collection.
inline BanditInstance random_instance(SplitMix64& rng, int k, int m, double bound = 1.0) {
  return BanditInstance::make(random_reward(rng, k, m, bound, 0.01), random_policy(rng, k, m),
                              PromptDistribution::uniform(k));
}

// Central finite differences of f around `at`, one probe pair per coordinate.
inline std::vector<double> central_difference(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> at,
    double h = 1e-5) {
  std::vector<double> g(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double saved = at[i];
    at[i] = saved + h;
    const double up = f(at);
    at[i] = saved - h;
    const double down = f(at);
    at[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Max-norm disagreement scaled by max(1, max-norm of `want`): relative for
// large gradients, absolute for small ones, so near-zero reference gradients
// do not inflate the ratio with finite-difference noise.
inline double gradient_disagreement(const std::vector<double>& got,
                                    const std::vector<double>& want) {
  double scale = 1.0;
  for (double w : want) scale = std::max(scale, std::fabs(w));
  double diff = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i)
    diff = std::max(diff, std::fabs(got[i] - want[i]));
  return diff / scale;
}

}  // namespace rpolab::testing
