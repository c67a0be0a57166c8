#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rpolab/dataset.hpp"
#include "rpolab/instance.hpp"
#include "rpolab/policy.hpp"

namespace rpolab {

enum class TrainMethod { Dpo, Rpo };

// Which policy plays the anchor role in the alignment term.
enum class BaselineKind { Chosen, Ref, Custom };

struct TrainerConfig {
  double beta = 0.1;            // KL temperature of the implicit reward
  double eta = 0.005;           // weight of the alignment term (0 disables it)
  double learning_rate = 0.1;
  int steps = 1000;
  int batch = 0;                // 0 = full batch, else per-step sample size
  std::uint64_t seed = 0;       // drives minibatch sampling only
  BaselineKind baseline = BaselineKind::Chosen;
  double baseline_smoothing = 0.5;
  std::optional<TabularPolicy> custom_baseline;
  double epsilon_floor = 1e-12;  // probability floor inside logs
  int log_every = 10;            // trace granularity; first and last step always logged

  void validate() const;
};

struct TraceRow {
  int step = 0;
  double rpo_loss = 0.0;
  double dpo_term = 0.0;
  double sft_term = 0.0;
  double mean_chosen_logprob = 0.0;
  double mean_kl_to_ref = 0.0;
  double j_pi = 0.0;
  double gap_vs_optimal = 0.0;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct TrainTrace {
  std::vector<TraceRow> rows;

  friend bool operator==(const TrainTrace&, const TrainTrace&) = default;
};

struct TrainResult {
  TabularPolicy policy;
  TrainTrace trace;
  TabularPolicy baseline_used;
};

// Preference loss of the policy's implicit reward, averaged over the data:
// -ln sigmoid of the preferred-minus-rejected implicit reward difference.
// Probabilities are floored at eps_floor inside logs.
double dpo_loss(const TabularPolicy& pol, const TabularPolicy& ref, const PreferenceDataset& data,
                double beta, double eps_floor = 1e-12);

// Expected negative log-likelihood of the baseline's responses:
// sum_x d0(x) sum_a base(a|x) * (-ln pol(a|x)).
double sft_loss(const TabularPolicy& pol, const TabularPolicy& base, const PromptDistribution& d0,
                double eps_floor = 1e-12);

struct RpoParts {
  double total = 0.0;
  double dpo_term = 0.0;
  double sft_term = 0.0;  // eta * beta * sft_loss
};

// Combined objective: dpo_loss + eta * beta * sft_loss.  With eta = 0 the
// total is bit-identical to dpo_loss alone.
RpoParts rpo_loss(const TabularPolicy& pol, const TabularPolicy& ref, const TabularPolicy& base,
                  const PreferenceDataset& data, const PromptDistribution& d0, double beta,
                  double eta, double eps_floor = 1e-12);

// Gradients in the policy's free coordinates: per-entry logits for tabular
// policies (zero off support), theta for feature-limited ones.
std::vector<double> dpo_gradient(const TabularPolicy& pol, const TabularPolicy& ref,
                                 const PreferenceDataset& data, double beta,
                                 double eps_floor = 1e-12);
std::vector<double> rpo_gradient(const TabularPolicy& pol, const TabularPolicy& ref,
                                 const TabularPolicy& base, const PreferenceDataset& data,
                                 const PromptDistribution& d0, double beta, double eta,
                                 double eps_floor = 1e-12);

// Full-batch (or seeded minibatch) gradient descent from the reference
// policy.  Throws solver_error if the loss stops being finite.
TrainResult train(const BanditInstance& inst, const PreferenceDataset& data,
                  const TrainerConfig& cfg, TrainMethod method);

// CSV with one row per logged step.
void write_trace_csv(const TrainTrace& trace, const std::string& path);

}  // namespace rpolab
