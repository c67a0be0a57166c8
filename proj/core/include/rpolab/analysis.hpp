#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rpolab/adversarial.hpp"
#include "rpolab/direct_opt.hpp"
#include "rpolab/instance.hpp"
#include "rpolab/policy.hpp"
#include "rpolab/reward.hpp"

namespace rpolab {

// How close the comparison distribution comes to distinguishing the policy
// pair's reward directions: max{0, sup over reward tables of the expected
// advantage difference divided by the root second moment of the paired
// differences under the data-collection law}.
struct CoverageReport {
  double value = 0.0;          // +infinity marks an uncovered direction
  std::string mode;            // "grid" (exhaustive, exact) or "sampled" (lower bound)
  int candidates_used = 0;
};

// Sup over box-class rewards, exhaustive on one-prompt instances with at
// most four responses (per-prompt constant shifts are quotiented out, so the
// search walks the faces of the box), sampled plus locally ascended
// otherwise.
CoverageReport coverage_coefficient(const BanditInstance& inst, const RewardClassSpec& cls,
                                    const TabularPolicy& pol, const TabularPolicy& base,
                                    int num_samples = 2000, bool refine = true,
                                    std::uint64_t seed = 0);

// Sup over an explicit finite candidate set (exact for that set).
CoverageReport coverage_from_candidates(const BanditInstance& inst,
                                        const std::vector<RewardTable>& candidates,
                                        const TabularPolicy& pol, const TabularPolicy& base);

// Sup over prompts of d1(x)/d0(x); 0/0 counts as 0, and any prompt with
// d1(x) > 0 = d0(x) makes the ratio infinite.
double density_ratio(const PromptDistribution& d0, const PromptDistribution& d1);

struct ShiftCheck {
  double shifted_gap = 0.0;  // expected shortfall vs the argmax comparator under d1
  double bound = 0.0;        // density ratio times the d0 shortfall (may be +infinity)
};

// Certifies that moving the prompt distribution from d0 to d1 inflates the
// suboptimality gap by at most the density ratio.  The per-prompt shortfall
// against the argmax comparator is nonnegative, which makes the inequality
// pointwise; a violation beyond 1e-9 indicates a computation bug and throws.
ShiftCheck prompt_shift_check(const BanditInstance& inst, const TabularPolicy& pol_hat,
                              const PromptDistribution& d1);

enum class SweepMethod { Maximin, Minimax, Rpo, Dpo };
enum class HyperMode { Theory, Fixed };

std::string to_string(SweepMethod m);
std::string to_string(HyperMode m);
SweepMethod sweep_method_from_string(const std::string& s);
HyperMode hyper_mode_from_string(const std::string& s);

struct SweepConfig {
  std::vector<int> n_grid;
  int seeds_per_n = 20;
  BanditInstance instance;
  SweepMethod method = SweepMethod::Minimax;
  HyperMode hyper_mode = HyperMode::Theory;
  double fixed_eta = 0.005;  // used when hyper_mode == Fixed
  double fixed_beta = 0.1;
  double delta = 0.1;        // confidence for the theory schedule
  RewardClassSpec reward_class;
  SolverOptions solver;
  TrainerConfig trainer;               // rpo/dpo cells
  double baseline_smoothing = 0.5;     // solver cells' chosen-response baseline
  std::uint64_t seed = 0;              // master; cells draw substreams by index

  void validate() const;
};

struct SweepCell {
  int n = 0;
  int seed = 0;
  double gap = std::numeric_limits<double>::quiet_NaN();
  double eta = 0.0;
  double beta = 0.0;
  std::string status;  // "ok" or "failed"
};

struct SweepResult {
  std::vector<SweepCell> cells;  // ordered by (n, seed)
  std::vector<int> n_values;
  std::vector<double> medians;   // per n, over ok cells only
  std::vector<double> q25, q75;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double slope_stderr = std::numeric_limits<double>::quiet_NaN();
  double slope_ci_half = std::numeric_limits<double>::quiet_NaN();  // 1.96 * stderr
  int failures = 0;
  SweepMethod method = SweepMethod::Minimax;
  double comparator_kl = 0.0;  // E_d0 KL(argmax comparator || reference), context only
};

// For each (n, seed): draw a dataset, fit with the configured method, and
// record the expected-reward shortfall against the per-prompt argmax
// comparator.  Failed cells are excluded from the medians and the
// least-squares slope of ln(median) on ln(n).
SweepResult gap_sweep(const SweepConfig& cfg);

// CSV layout: N,seed,gap,method,eta,beta,status.  Byte-deterministic.
void write_sweep_csv(const SweepResult& result, const std::string& path);
// Companion gnuplot script: log-log scatter of the CSV plus the fitted line.
void write_sweep_gnuplot(const SweepResult& result, const std::string& csv_path,
                         const std::string& path);

// The three-response showcase: rewards (1, 0.5, 0), reference
// (0.45, 0.45, 0.1), uniform prompt weights, and one observed comparison
// where the best response beats the middle one.
BanditInstance figure1_instance();
PreferenceDataset figure1_dataset();

struct Figure1Row {
  std::string name;
  std::array<double, 3> probs{};
  double j = 0.0;  // expected true reward
};

struct Figure1Report {
  Figure1Row ref_row;
  Figure1Row dpo_row;  // trained preference-only policy
  std::vector<Figure1Row> rpo_rows;  // one per alignment weight in the grid
  std::vector<double> eta_grid;
  double beta = 1.0;
  int steps = 2000;
  // Preference-only grid certificate: the near-minimal set is degenerate,
  // containing both a point that dumps mass on the never-compared response
  // and one that does not, at losses within the stated spread of the grid
  // minimum and of each other.
  double dpo_grid_min_loss = 0.0;
  std::array<double, 3> dpo_point_high_c{};
  std::array<double, 3> dpo_point_low_c{};
  double dpo_loss_high_c = 0.0;
  double dpo_loss_low_c = 0.0;
};

Figure1Report figure1_study(const std::vector<double>& eta_grid, double beta, int steps);
std::string figure1_to_json(const Figure1Report& report);

struct OveroptConfig {
  int seeds = 20;
  int n = 200;              // comparisons per instance
  int num_prompts = 4;
  int num_responses = 6;
  int feature_dim = 2;      // strictly below num_responses: the policy cannot
                            // represent arbitrary rows
  std::vector<double> eta_grid = {0.0, 0.005, 0.05, 0.5};
  double headline_eta = 0.05;  // the paired comparison's alignment weight
  TrainerConfig trainer;       // eta is overridden per arm
  std::uint64_t seed = 0;

  void validate() const;
};

struct OveroptSeedResult {
  double dpo_final = 0.0;  // final mean log-probability of the chosen responses
  double rpo_final = 0.0;  // headline-eta arm
  std::vector<double> final_by_eta;
  TrainTrace dpo_trace;
  TrainTrace rpo_trace;
};

struct OveroptReport {
  std::vector<OveroptSeedResult> per_seed;
  double fraction_rpo_ge_dpo = 0.0;
  std::vector<double> eta_grid;
  std::vector<double> median_final_by_eta;
  bool eta0_identical = false;  // zero-weight arm reproduced the preference-only run bit-for-bit
};

// Paired runs on feature-limited instances: the preference-only trainer and
// the alignment-regularized trainer share instance, data, and every other
// setting, isolating the alignment weight's effect on how much probability
// the final policy keeps on the responses the data endorsed.
OveroptReport overopt_study(const OveroptConfig& cfg);
std::string overopt_to_json(const OveroptReport& report);

struct ConcentrationReport {
  double pass_fraction = 0.0;  // trials where the deviation bound held for every candidate
  double mean_margin = 0.0;    // average worst-case slack of the bound
  double slack = 0.0;          // the additive (3/n) log-covering term
};

// Draws `trials` datasets and checks, for every candidate reward, that the
// likelihood advantage of the true table over the candidate is at most the
// exact pairwise squared-Hellinger separation (doubled, negated) plus the
// covering-number slack.  The pass fraction should be at least 1 - delta.
ConcentrationReport concentration_check(const BanditInstance& inst,
                                        const std::vector<RewardTable>& candidates, int n,
                                        double delta, int trials, std::uint64_t seed = 0);
std::string concentration_to_json(const ConcentrationReport& report);

// A four-prompt, six-response instance with uniform reference behavior and
// per-prompt reward ladders of distinct slopes: every pair is compared with
// positive probability, so coverage is finite and rate studies are clean.
BanditInstance wellcovered_instance();

}  // namespace rpolab
