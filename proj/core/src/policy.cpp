#include "rpolab/policy.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

#include "rpolab/dataset.hpp"
#include "rpolab/instance.hpp"

namespace rpolab {

namespace {
constexpr double kRowSumTol = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

void PromptDistribution::validate() const {
  if (w.empty()) throw config_error("PromptDistribution: empty");
  double s = 0.0;
  for (double p : w) {
    if (!(p >= 0.0)) throw config_error("PromptDistribution: negative weight");
    s += p;
  }
  if (std::fabs(s - 1.0) > kRowSumTol)
    throw config_error("PromptDistribution: weights sum to " + std::to_string(s));
}

PromptDistribution PromptDistribution::uniform(int num_prompts) {
  if (num_prompts <= 0) throw config_error("PromptDistribution: need at least one prompt");
  return PromptDistribution(std::vector<double>(num_prompts, 1.0 / num_prompts));
}

std::vector<double> TabularPolicy::probs(int x) const {
  const int m = num_responses();
  std::vector<double> p(m, 0.0);
  double mx = kNegInf;
  for (int a = 0; a < m; ++a)
    if (supported(x, a) && logits.at(x, a) > mx) mx = logits.at(x, a);
  if (mx == kNegInf) throw config_error("TabularPolicy: row with empty support");
  double s = 0.0;
  for (int a = 0; a < m; ++a) {
    if (!supported(x, a)) continue;
    p[a] = std::exp(logits.at(x, a) - mx);
    s += p[a];
  }
  for (int a = 0; a < m; ++a)
    if (supported(x, a)) p[a] /= s;
  return p;
}

std::vector<double> TabularPolicy::log_probs(int x) const {
  const int m = num_responses();
  std::vector<double> lp(m, kNegInf);
  double mx = kNegInf;
  for (int a = 0; a < m; ++a)
    if (supported(x, a) && logits.at(x, a) > mx) mx = logits.at(x, a);
  if (mx == kNegInf) throw config_error("TabularPolicy: row with empty support");
  double s = 0.0;
  for (int a = 0; a < m; ++a)
    if (supported(x, a)) s += std::exp(logits.at(x, a) - mx);
  const double lse = mx + std::log(s);
  for (int a = 0; a < m; ++a)
    if (supported(x, a)) lp[a] = logits.at(x, a) - lse;
  return lp;
}

void TabularPolicy::set_theta(const std::vector<double>& new_theta) {
  if (!feature_limited()) throw config_error("TabularPolicy: set_theta on a tabular policy");
  if (new_theta.size() != theta.size())
    throw config_error("TabularPolicy: theta dimension mismatch");
  theta = new_theta;
  const int d = feature_dim();
  for (int x = 0; x < num_prompts(); ++x) {
    for (int a = 0; a < num_responses(); ++a) {
      double z = 0.0;
      for (int j = 0; j < d; ++j) z += feature(x, a, j) * theta[j];
      logits.at(x, a) = z;
    }
  }
}

void TabularPolicy::validate() const {
  if (logits.rows <= 0 || logits.cols <= 0) throw config_error("TabularPolicy: empty");
  if (support.size() != logits.size()) throw config_error("TabularPolicy: support shape mismatch");
  if (!theta.empty() &&
      features.size() != logits.size() * theta.size())
    throw config_error("TabularPolicy: feature shape mismatch");
  for (int x = 0; x < num_prompts(); ++x) {
    bool any = false;
    for (int a = 0; a < num_responses(); ++a) any = any || supported(x, a);
    if (!any) throw config_error("TabularPolicy: row with empty support");
  }
}

TabularPolicy TabularPolicy::uniform(int num_prompts, int num_responses) {
  TabularPolicy pol;
  pol.logits = Grid(num_prompts, num_responses, 0.0);
  pol.support.assign(pol.logits.size(), 1);
  pol.validate();
  return pol;
}

TabularPolicy TabularPolicy::from_probs(const Grid& p) {
  TabularPolicy pol;
  pol.logits = Grid(p.rows, p.cols, 0.0);
  pol.support.assign(p.v.size(), 0);
  for (int x = 0; x < p.rows; ++x) {
    double s = 0.0;
    for (int a = 0; a < p.cols; ++a) {
      const double q = p.at(x, a);
      if (!(q >= 0.0)) throw config_error("TabularPolicy: negative probability");
      s += q;
      if (q > 0.0) {
        pol.support[static_cast<std::size_t>(x) * p.cols + a] = 1;
        pol.logits.at(x, a) = std::log(q);
      }
    }
    if (std::fabs(s - 1.0) > kRowSumTol)
      throw config_error("TabularPolicy: row sums to " + std::to_string(s));
  }
  pol.validate();
  return pol;
}

TabularPolicy TabularPolicy::from_logits(Grid logits, std::vector<std::uint8_t> support) {
  TabularPolicy pol;
  pol.logits = std::move(logits);
  pol.support = std::move(support);
  pol.validate();
  return pol;
}

TabularPolicy TabularPolicy::from_features(int num_prompts, int num_responses, int feature_dim,
                                           std::vector<double> features, std::vector<double> theta,
                                           std::vector<std::uint8_t> support) {
  TabularPolicy pol;
  pol.logits = Grid(num_prompts, num_responses, 0.0);
  pol.support = std::move(support);
  pol.features = std::move(features);
  pol.theta = std::move(theta);
  if (static_cast<int>(pol.theta.size()) != feature_dim)
    throw config_error("TabularPolicy: theta dimension mismatch");
  pol.validate();
  pol.set_theta(pol.theta);
  return pol;
}

double kl_to_ref(const TabularPolicy& pol, const TabularPolicy& ref, int x) {
  if (!pol.logits.same_shape(ref.logits)) throw std::domain_error("kl_to_ref: shape mismatch");
  const std::vector<double> lp = pol.log_probs(x);
  const std::vector<double> lq = ref.log_probs(x);
  const std::vector<double> p = pol.probs(x);
  double kl = 0.0;
  for (int a = 0; a < pol.num_responses(); ++a) {
    if (!pol.supported(x, a)) continue;
    if (!ref.supported(x, a))
      throw std::domain_error("kl_to_ref: policy support escapes the reference support");
    if (p[a] > 0.0) kl += p[a] * (lp[a] - lq[a]);
  }
  return kl;
}

KlOptimalPolicy optimal_kl_policy(const RewardTable& r, const TabularPolicy& ref, double beta) {
  if (beta <= 0.0) throw config_error("optimal_kl_policy: beta must be positive");
  if (r.num_prompts() != ref.num_prompts() || r.num_responses() != ref.num_responses())
    throw config_error("optimal_kl_policy: shape mismatch");
  KlOptimalPolicy out;
  out.policy.logits = Grid(ref.num_prompts(), ref.num_responses(), 0.0);
  out.policy.support = ref.support;
  out.log_partition.resize(ref.num_prompts());
  for (int x = 0; x < ref.num_prompts(); ++x) {
    const std::vector<double> lq = ref.log_probs(x);
    double mx = kNegInf;
    for (int a = 0; a < ref.num_responses(); ++a) {
      if (!ref.supported(x, a)) continue;
      const double z = lq[a] + r.at(x, a) / beta;
      out.policy.logits.at(x, a) = z;
      if (z > mx) mx = z;
    }
    double s = 0.0;
    for (int a = 0; a < ref.num_responses(); ++a)
      if (ref.supported(x, a)) s += std::exp(out.policy.logits.at(x, a) - mx);
    out.log_partition[x] = mx + std::log(s);
  }
  out.policy.validate();
  return out;
}

Grid implicit_reward(const TabularPolicy& pol, const TabularPolicy& ref, double beta) {
  if (beta <= 0.0) throw config_error("implicit_reward: beta must be positive");
  if (!pol.logits.same_shape(ref.logits)) throw std::domain_error("implicit_reward: shape mismatch");
  Grid out(pol.num_prompts(), pol.num_responses(), 0.0);
  for (int x = 0; x < pol.num_prompts(); ++x) {
    const std::vector<double> lp = pol.log_probs(x);
    const std::vector<double> lq = ref.log_probs(x);
    for (int a = 0; a < pol.num_responses(); ++a) {
      if (!ref.supported(x, a)) continue;
      if (!pol.supported(x, a) || lp[a] == kNegInf)
        throw std::domain_error("implicit_reward: zero policy probability inside the reference support");
      if (lq[a] == kNegInf)
        throw std::domain_error("implicit_reward: zero reference probability inside its support");
      out.at(x, a) = beta * (lp[a] - lq[a]);
    }
  }
  return out;
}

double value(const TabularPolicy& pol, const BanditInstance& inst, const PromptDistribution& d) {
  if (d.num_prompts() != inst.num_prompts) throw config_error("value: prompt count mismatch");
  double j = 0.0;
  for (int x = 0; x < inst.num_prompts; ++x) {
    const std::vector<double> p = pol.probs(x);
    double row = 0.0;
    for (int a = 0; a < inst.num_responses; ++a) row += p[a] * inst.true_reward.at(x, a);
    j += d.at(x) * row;
  }
  return j;
}

double gap(const TabularPolicy& pol_hat, const TabularPolicy& comparator, const BanditInstance& inst,
           const PromptDistribution& d) {
  return value(comparator, inst, d) - value(pol_hat, inst, d);
}

TabularPolicy chosen_policy(const PreferenceDataset& data, const BanditInstance& inst,
                            double smoothing, bool pool_prompts) {
  if (smoothing < 0.0) throw config_error("chosen_policy: negative smoothing");
  const int k = inst.num_prompts;
  const int m = inst.num_responses;
  Grid counts(k, m, 0.0);
  std::vector<double> pooled(m, 0.0);
  for (const PreferenceTriple& t : data.triples) {
    const int chosen = t.y == 1 ? t.a1 : t.a0;
    counts.at(t.x, chosen) += 1.0;
    pooled[chosen] += 1.0;
  }
  Grid p(k, m, 0.0);
  const TabularPolicy& ref = inst.reference_policy;
  for (int x = 0; x < k; ++x) {
    const double* row = pool_prompts ? pooled.data() : &counts.v[static_cast<std::size_t>(x) * m];
    double observed = 0.0;
    double total = 0.0;
    for (int a = 0; a < m; ++a) {
      if (!ref.supported(x, a)) continue;
      observed += row[a];
      total += row[a] + smoothing;
    }
    if (observed == 0.0) {
      // Prompt never observed: fall back to the reference row.
      const std::vector<double> q = ref.probs(x);
      for (int a = 0; a < m; ++a) p.at(x, a) = q[a];
      continue;
    }
    for (int a = 0; a < m; ++a)
      if (ref.supported(x, a)) p.at(x, a) = (row[a] + smoothing) / total;
  }
  return TabularPolicy::from_probs(p);
}

TabularPolicy argmax_policy(const BanditInstance& inst) {
  Grid p(inst.num_prompts, inst.num_responses, 0.0);
  for (int x = 0; x < inst.num_prompts; ++x) {
    int best = -1;
    double best_r = kNegInf;
    for (int a = 0; a < inst.num_responses; ++a) {
      if (!inst.reference_policy.supported(x, a)) continue;
      if (inst.true_reward.at(x, a) > best_r) {
        best_r = inst.true_reward.at(x, a);
        best = a;
      }
    }
    if (best < 0) throw config_error("argmax_policy: row with empty reference support");
    p.at(x, best) = 1.0;
  }
  return TabularPolicy::from_probs(p);
}

}  // namespace rpolab
