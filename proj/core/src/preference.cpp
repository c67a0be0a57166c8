#include "rpolab/preference.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include "rpolab/math.hpp"

namespace rpolab {

namespace {

// Inverse-CDF draw over a probability row, walking indices in order.
int sample_index(const std::vector<double>& p, SplitMix64& rng) {
  const double u = rng.next_double();
  double cum = 0.0;
  int last = 0;
  for (int a = 0; a < static_cast<int>(p.size()); ++a) {
    if (p[a] <= 0.0) continue;
    cum += p[a];
    last = a;
    if (u < cum) return a;
  }
  return last;  // guards against cum rounding just below 1
}

int positive_support_size(const TabularPolicy& pol, int x) {
  int n = 0;
  const std::vector<double> p = pol.probs(x);
  for (double q : p) n += q > 0.0 ? 1 : 0;
  return n;
}

}  // namespace

void BanditInstance::validate() const {
  if (num_prompts <= 0 || num_responses <= 0)
    throw config_error("BanditInstance: empty prompt or response set");
  if (true_reward.num_prompts() != num_prompts || true_reward.num_responses() != num_responses)
    throw config_error("BanditInstance: reward shape mismatch");
  true_reward.validate();
  if (reference_policy.num_prompts() != num_prompts ||
      reference_policy.num_responses() != num_responses)
    throw config_error("BanditInstance: reference policy shape mismatch");
  reference_policy.validate();
  if (d0.num_prompts() != num_prompts) throw config_error("BanditInstance: d0 size mismatch");
  d0.validate();
  if (behavior.prompt_weights.num_prompts() != num_prompts)
    throw config_error("BanditInstance: behavior prompt weights size mismatch");
  behavior.prompt_weights.validate();
  if (behavior.kind == BehaviorSpec::Kind::IidPolicy) {
    if (behavior.policy.num_prompts() != num_prompts ||
        behavior.policy.num_responses() != num_responses)
      throw config_error("BanditInstance: behavior policy shape mismatch");
    behavior.policy.validate();
    for (int x = 0; x < num_prompts; ++x) {
      for (int a = 0; a < num_responses; ++a) {
        if (behavior.policy.supported(x, a) && !reference_policy.supported(x, a))
          throw config_error("BanditInstance: behavior support escapes the reference support");
      }
      if (behavior.prompt_weights.at(x) > 0.0 && positive_support_size(behavior.policy, x) < 2)
        throw config_error("BanditInstance: behavior needs two sampleable responses per prompt");
    }
  } else {
    if (static_cast<int>(behavior.pairs.size()) != num_prompts)
      throw config_error("BanditInstance: need one fixed pair per prompt");
    for (int x = 0; x < num_prompts; ++x) {
      const auto [a1, a0] = behavior.pairs[x];
      if (a1 < 0 || a1 >= num_responses || a0 < 0 || a0 >= num_responses || a1 == a0)
        throw config_error("BanditInstance: invalid fixed pair");
      if (!reference_policy.supported(x, a1) || !reference_policy.supported(x, a0))
        throw config_error("BanditInstance: fixed pair outside the reference support");
    }
  }
}

double BanditInstance::pair_prob(int x, int a1, int a0) const {
  if (x < 0 || x >= num_prompts || a1 < 0 || a1 >= num_responses || a0 < 0 ||
      a0 >= num_responses)
    throw std::domain_error("pair_prob: index out of range");
  const double wx = behavior.prompt_weights.at(x);
  if (wx == 0.0 || a1 == a0) return 0.0;
  if (behavior.kind == BehaviorSpec::Kind::FixedPairs)
    return behavior.pairs[x] == std::pair<int, int>(a1, a0) ? wx : 0.0;
  const std::vector<double> p = behavior.policy.probs(x);
  double same = 0.0;
  for (double q : p) same += q * q;
  return wx * p[a1] * p[a0] / (1.0 - same);
}

BanditInstance BanditInstance::make(RewardTable r, TabularPolicy ref, PromptDistribution d0) {
  BanditInstance inst;
  inst.num_prompts = r.num_prompts();
  inst.num_responses = r.num_responses();
  inst.true_reward = std::move(r);
  inst.reference_policy = std::move(ref);
  inst.d0 = std::move(d0);
  inst.behavior.kind = BehaviorSpec::Kind::IidPolicy;
  inst.behavior.prompt_weights = inst.d0;
  inst.behavior.policy = inst.reference_policy;
  inst.validate();
  return inst;
}

double bt_prob(const RewardTable& r, int x, int a1, int a0) {
  return sigmoid(r.at(x, a1) - r.at(x, a0));
}

int sample_label(const RewardTable& r, int x, int a1, int a0, SplitMix64& rng) {
  return rng.next_double() < bt_prob(r, x, a1, a0) ? 1 : 0;
}

PreferenceDataset generate_dataset(const BanditInstance& inst, int n, SplitMix64& rng) {
  if (n < 0) throw config_error("generate_dataset: negative size");
  inst.validate();
  PreferenceDataset data;
  data.triples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    PreferenceTriple t;
    t.x = sample_index(inst.behavior.prompt_weights.w, rng);
    if (inst.behavior.kind == BehaviorSpec::Kind::FixedPairs) {
      t.a1 = inst.behavior.pairs[t.x].first;
      t.a0 = inst.behavior.pairs[t.x].second;
    } else {
      const std::vector<double> p = inst.behavior.policy.probs(t.x);
      do {
        t.a1 = sample_index(p, rng);
        t.a0 = sample_index(p, rng);
      } while (t.a1 == t.a0);
    }
    t.y = sample_label(inst.true_reward, t.x, t.a1, t.a0, rng);
    data.triples.push_back(t);
  }
  return data;
}

double mle_loss(const RewardTable& r, const PreferenceDataset& data) {
  if (data.size() == 0) throw std::domain_error("mle_loss: empty dataset");
  double total = 0.0;
  for (const PreferenceTriple& t : data.triples) {
    const double d = r.at(t.x, t.a1) - r.at(t.x, t.a0);
    total += -log_sigmoid(t.y == 1 ? d : -d);
  }
  return total / data.size();
}

double mle_loss(const RewardTable& r, const AggregatedData& data) {
  if (data.total <= 0.0) throw std::domain_error("mle_loss: empty dataset");
  double total = 0.0;
  for (const PairCell& c : data.cells) {
    const double d = r.at(c.x, c.a1) - r.at(c.x, c.a0);
    total += -c.weight * log_sigmoid(c.y == 1 ? d : -d);
  }
  return total / data.total;
}

Grid mle_gradient(const RewardTable& r, const PreferenceDataset& data) {
  if (data.size() == 0) throw std::domain_error("mle_gradient: empty dataset");
  Grid g(r.num_prompts(), r.num_responses(), 0.0);
  const double inv_n = 1.0 / data.size();
  for (const PreferenceTriple& t : data.triples) {
    const double d = r.at(t.x, t.a1) - r.at(t.x, t.a0);
    // d/dd of -ln sigmoid(d) is -sigmoid(-d); of -ln sigmoid(-d) is sigmoid(d).
    const double dd = t.y == 1 ? -sigmoid(-d) : sigmoid(d);
    g.at(t.x, t.a1) += dd * inv_n;
    g.at(t.x, t.a0) -= dd * inv_n;
  }
  return g;
}

Grid mle_gradient(const RewardTable& r, const AggregatedData& data) {
  if (data.total <= 0.0) throw std::domain_error("mle_gradient: empty dataset");
  Grid g(r.num_prompts(), r.num_responses(), 0.0);
  const double inv_n = 1.0 / data.total;
  for (const PairCell& c : data.cells) {
    const double d = r.at(c.x, c.a1) - r.at(c.x, c.a0);
    const double dd = (c.y == 1 ? -sigmoid(-d) : sigmoid(d)) * c.weight * inv_n;
    g.at(c.x, c.a1) += dd;
    g.at(c.x, c.a0) -= dd;
  }
  return g;
}

AggregatedData AggregatedData::from(const PreferenceDataset& data) {
  return from_triples(data.triples);
}

AggregatedData AggregatedData::from_triples(const std::vector<PreferenceTriple>& triples) {
  std::map<std::tuple<int, int, int, int>, double> counts;
  for (const PreferenceTriple& t : triples) counts[{t.x, t.a1, t.a0, t.y}] += 1.0;
  AggregatedData agg;
  agg.cells.reserve(counts.size());
  for (const auto& [key, w] : counts) {
    const auto [x, a1, a0, y] = key;
    agg.cells.push_back({x, a1, a0, y, w});
    agg.total += w;
  }
  return agg;
}

double tv_bt(const RewardTable& r1, const RewardTable& r2, int x, int a1, int a0) {
  return std::fabs(bt_prob(r1, x, a1, a0) - bt_prob(r2, x, a1, a0));
}

double hellinger_sq_bt(const RewardTable& r1, const RewardTable& r2, int x, int a1, int a0) {
  const double p = bt_prob(r1, x, a1, a0);
  const double q = bt_prob(r2, x, a1, a0);
  const double dw = std::sqrt(p) - std::sqrt(q);
  const double dl = std::sqrt(1.0 - p) - std::sqrt(1.0 - q);
  return dw * dw + dl * dl;
}

double sigmoid_kappa(double bound) {
  if (bound < 0.0) throw std::domain_error("sigmoid_kappa: negative bound");
  const double t = 1.0 + std::exp(bound);
  return 1.0 / (t * t);
}

}  // namespace rpolab
