#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rpolab/dataset.hpp"
#include "rpolab/grid.hpp"
#include "rpolab/instance.hpp"
#include "rpolab/policy.hpp"
#include "rpolab/reward.hpp"

namespace rpolab {

// The feasible set of adversarial reward tables: every entry lies in
// [lower, bound].  The default lower edge 0 gives the standard box that
// contains the all-zero table; setting lower == bound pins the class to a
// single constant table, which degenerates the inner problem to one point.
// grid_step is only consumed by exhaustive-search cross-checks.
struct RewardClassSpec {
  double lower = 0.0;
  double bound = 1.0;
  double grid_step = 0.01;

  void validate() const;
};

struct SolverOptions {
  double inner_tol = 1e-8;   // first-order tolerance of the convex reward solves
  double outer_tol = 1e-6;   // gradient-norm tolerance of the policy ascent
  int max_inner_iters = 200000;
  int max_outer_iters = 5000;
  double certification_tol = 1e-4;  // permitted |maximin - minimax|
  bool record_trace = false;        // store per-iteration objective values

  void validate() const;
};

// Result of the inner reward minimization for a fixed policy.
struct InnerSolution {
  double value = 0.0;
  RewardTable reward;
  int iterations = 0;
};

struct SolveReport {
  double maximin_value = std::numeric_limits<double>::quiet_NaN();
  double minimax_value = std::numeric_limits<double>::quiet_NaN();
  double duality_gap = std::numeric_limits<double>::quiet_NaN();
  TabularPolicy recovered_policy;
  RewardTable adversarial_reward;  // raw in-box minimizer
  Grid centered_reward;            // reporting copy, baseline-expected value 0 per prompt
  double t_adv_at_recovered = std::numeric_limits<double>::quiet_NaN();
  int inner_iterations = 0;
  int outer_iterations = 0;
  double inner_tolerance = 0.0;
  double outer_tolerance = 0.0;
  bool certified = false;
  std::vector<double> objective_trace;  // filled when SolverOptions::record_trace
};

// Schedule of regularization strengths derived from the sample size: the
// KL temperature shrinks as 1/sqrt(n) and the alignment weight as
// sqrt(log covering / n), with a resolution epsilon and the covering-number
// log that feed both.
struct TheoryHyperparams {
  double eta = 0.0;
  double beta = 0.0;
  double epsilon = 0.0;
  double log_cover = 0.0;
  double iota = 0.0;
  long n = 0;
  double delta = 0.0;
  double bound = 0.0;
};

// Joint objective of the policy player and the reward adversary:
//   eta * sum_x d0(x) [ E_{a~pol} r(x,a) - E_{a~base} r(x,a)
//                       - beta * KL(pol(.|x) || ref(.|x)) ]
//   + average negative log-likelihood of the data under r.
double phi(const TabularPolicy& pol, const RewardTable& r, const BanditInstance& inst,
           const TabularPolicy& base, const PreferenceDataset& data, double beta, double eta);

// Gradient of phi with respect to the policy's logits, holding the reward
// fixed.  By the envelope argument this is also the ascent direction of the
// inner-minimized objective when r is the inner minimizer.
Grid phi_policy_gradient(const TabularPolicy& pol, const BanditInstance& inst,
                         const TabularPolicy& base, const RewardTable& r, double beta, double eta);

// Inner problem: minimize phi over the reward class for a fixed policy, by
// projected gradient descent with backtracking.  The objective is convex in
// the reward (linear terms plus the convex likelihood), so the value is a
// global minimum up to the first-order tolerance.
InnerSolution t_adv(const TabularPolicy& pol, const BanditInstance& inst,
                    const TabularPolicy& base, const PreferenceDataset& data,
                    const RewardClassSpec& cls, double beta, double eta,
                    const SolverOptions& opts = {});

// Order-swapped objective after maximizing the policy player in closed form:
//   F(r) = eta * sum_x d0(x) [ beta * ln Z_r(x) - E_{a~base} r(x,a) ]
//          + average negative log-likelihood of the data under r,
// where Z_r(x) = sum_a ref(a|x) exp(r(x,a)/beta).  Convex in r.
double minimax_objective(const RewardTable& r, const BanditInstance& inst,
                         const TabularPolicy& base, const PreferenceDataset& data, double beta,
                         double eta);
Grid minimax_gradient(const RewardTable& r, const BanditInstance& inst, const TabularPolicy& base,
                      const PreferenceDataset& data, double beta, double eta);

// Outer ascent over policy logits with the envelope gradient, solving the
// inner reward minimization to tolerance at every step.  Monotone via
// backtracking line search with step backoff; stops at the gradient-norm
// tolerance or when improvements fall below the inner solver's resolution.
SolveReport solve_maximin(const BanditInstance& inst, const TabularPolicy& base,
                          const PreferenceDataset& data, const RewardClassSpec& cls, double beta,
                          double eta, const SolverOptions& opts = {});

// Projected gradient descent on the convex order-swapped objective; the
// recovered policy is the KL-regularized best response to the minimizing
// reward.
SolveReport solve_minimax(const BanditInstance& inst, const TabularPolicy& base,
                          const PreferenceDataset& data, const RewardClassSpec& cls, double beta,
                          double eta, const SolverOptions& opts = {});

// Runs both solvers and certifies that the two values agree within
// certification_tol.  Throws certification_error (exit code 3 in the CLI)
// with both values when they do not.  The returned report carries the
// minimax side's recovered policy and reward plus the inner-minimized
// objective value at that policy.
SolveReport duality_gap(const BanditInstance& inst, const TabularPolicy& base,
                        const PreferenceDataset& data, const RewardClassSpec& cls, double beta,
                        double eta, const SolverOptions& opts = {});

// Sample-size-driven hyperparameter schedule for a k x m table class with
// entries in [0, bound]:
//   epsilon   = 1 / (6 (1 + e^bound) n)
//   log_cover = k * m * ln(max(1, ceil(bound / (2 epsilon))))
//   iota      = sqrt(log_cover + ln(1/delta))
//   beta      = 1 / sqrt(n)
//   eta       = (1 + e^bound)^(-2) * sqrt(24 (log_cover + ln(1/delta)) / n)
// With proof_constants = true the eta prefactor (1 + e^bound)^(-2) is
// dropped, giving the looser constant 2 sqrt(6) * sqrt((log_cover +
// ln(1/delta)) / n) used in the analysis rather than the tuned one.
// Requires n >= 1 and 0 < delta < 1/e.
TheoryHyperparams theory_hyperparams(long n, double delta, double bound, int k, int m,
                                     bool proof_constants = false);

// Reporting canonicalization: subtract from each prompt's row the
// baseline-expected reward, so the baseline policy's expected reward is 0
// per prompt.  Differences, and hence the joint objective, are unchanged.
Grid center_rewards(const Grid& reward, const TabularPolicy& base);

std::string report_to_json(const SolveReport& report);
void write_report_json(const SolveReport& report, const std::string& path);

}  // namespace rpolab
