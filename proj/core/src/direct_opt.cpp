#include "rpolab/direct_opt.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "rpolab/aggregate.hpp"
#include "rpolab/errors.hpp"
#include "rpolab/math.hpp"
#include "rpolab/rng.hpp"
#include "rpolab/serialize.hpp"

namespace rpolab {

namespace {

void check_feasible(const TabularPolicy& pol, const TabularPolicy& ref) {
  if (!pol.logits.same_shape(ref.logits)) throw std::domain_error("policy/reference shape mismatch");
  for (int x = 0; x < pol.num_prompts(); ++x)
    for (int a = 0; a < pol.num_responses(); ++a)
      if (pol.supported(x, a) && !ref.supported(x, a))
        throw std::domain_error("policy support escapes the reference support");
}

// Per-prompt state of the policy being optimized: probabilities, floored
// log probabilities, floor-activity flags, and (for feature policies) the
// probability-weighted feature mean.
struct RowCache {
  std::vector<double> p;
  std::vector<double> lp;
  std::vector<std::uint8_t> act;
  std::vector<double> fmean;
};

struct Engine {
  const TabularPolicy* pol;
  const TabularPolicy* ref;
  double beta;
  double log_floor;
  std::vector<RowCache> rows;
  std::vector<std::vector<double>> ref_lp;  // floored per prompt

  Engine(const TabularPolicy& pol_, const TabularPolicy& ref_, double beta_, double eps_floor)
      : pol(&pol_), ref(&ref_), beta(beta_), log_floor(std::log(eps_floor)) {
    if (beta <= 0.0) throw config_error("beta must be positive");
    if (!(eps_floor > 0.0)) throw config_error("epsilon floor must be positive");
    check_feasible(pol_, ref_);
    const int k = pol_.num_prompts();
    const int m = pol_.num_responses();
    const int d = pol_.feature_dim();
    rows.resize(k);
    ref_lp.resize(k);
    for (int x = 0; x < k; ++x) {
      RowCache& rc = rows[x];
      rc.p = pol_.probs(x);
      rc.lp = pol_.log_probs(x);
      rc.act.assign(m, 0);
      for (int a = 0; a < m; ++a) {
        if (rc.lp[a] > log_floor) {
          rc.act[a] = 1;
        } else {
          rc.lp[a] = log_floor;
        }
      }
      std::vector<double> rlp = ref_.log_probs(x);
      for (int a = 0; a < m; ++a)
        if (rlp[a] < log_floor) rlp[a] = log_floor;
      ref_lp[x] = std::move(rlp);
      if (d > 0) {
        rc.fmean.assign(d, 0.0);
        for (int a = 0; a < m; ++a)
          for (int j = 0; j < d; ++j) rc.fmean[j] += rc.p[a] * pol_.feature(x, a, j);
      }
    }
  }

  // Implicit-reward difference of the cell's pair.
  double margin(const PairCell& c) const {
    const RowCache& rc = rows[c.x];
    return beta * ((rc.lp[c.a1] - ref_lp[c.x][c.a1]) - (rc.lp[c.a0] - ref_lp[c.x][c.a0]));
  }

  double preference_loss(const AggregatedData& agg) const {
    double total = 0.0;
    for (const PairCell& c : agg.cells) {
      const double s = c.y == 1 ? 1.0 : -1.0;
      total += c.weight * softplus(-s * margin(c));
    }
    return total / agg.total;
  }

  double alignment_loss(const TabularPolicy& base, const PromptDistribution& d0) const {
    double total = 0.0;
    for (int x = 0; x < pol->num_prompts(); ++x) {
      if (d0.at(x) == 0.0) continue;
      const std::vector<double> bp = base.probs(x);
      double row = 0.0;
      for (int a = 0; a < pol->num_responses(); ++a)
        if (bp[a] > 0.0) row += bp[a] * -rows[x].lp[a];
      total += d0.at(x) * row;
    }
    return total;
  }

  double chosen_logprob(const AggregatedData& agg) const {
    double total = 0.0;
    for (const PairCell& c : agg.cells)
      total += c.weight * rows[c.x].lp[c.y == 1 ? c.a1 : c.a0];
    return total / agg.total;
  }

  int param_count() const {
    return pol->feature_limited() ? pol->feature_dim()
                                  : pol->num_prompts() * pol->num_responses();
  }

  // Adds the preference-loss gradient (in free coordinates) into g.
  void add_preference_gradient(const AggregatedData& agg, std::vector<double>& g) const {
    const int m = pol->num_responses();
    const int d = pol->feature_dim();
    for (const PairCell& c : agg.cells) {
      const double s = c.y == 1 ? 1.0 : -1.0;
      const double dldz = -s * sigmoid(-s * margin(c)) * c.weight / agg.total;
      const RowCache& rc = rows[c.x];
      const double w1 = rc.act[c.a1] ? beta * dldz : 0.0;
      const double w0 = rc.act[c.a0] ? beta * dldz : 0.0;
      if (d == 0) {
        double* row = g.data() + static_cast<std::size_t>(c.x) * m;
        row[c.a1] += w1;
        row[c.a0] -= w0;
        const double spread = w1 - w0;  // only floor-clamped pairs leave a row term
        if (spread != 0.0)
          for (int a = 0; a < m; ++a) row[a] -= spread * rc.p[a];
      } else {
        for (int j = 0; j < d; ++j) {
          g[j] += w1 * (pol->feature(c.x, c.a1, j) - rc.fmean[j]);
          g[j] -= w0 * (pol->feature(c.x, c.a0, j) - rc.fmean[j]);
        }
      }
    }
  }

  // Adds scale * gradient of alignment_loss into g.
  void add_alignment_gradient(const TabularPolicy& base, const PromptDistribution& d0, double scale,
                              std::vector<double>& g) const {
    const int m = pol->num_responses();
    const int d = pol->feature_dim();
    for (int x = 0; x < pol->num_prompts(); ++x) {
      const double wx = d0.at(x) * scale;
      if (wx == 0.0) continue;
      const std::vector<double> bp = base.probs(x);
      const RowCache& rc = rows[x];
      double mass = 0.0;  // baseline mass with an active (unclamped) log
      for (int a = 0; a < m; ++a)
        if (bp[a] > 0.0 && rc.act[a]) mass += bp[a];
      if (d == 0) {
        double* row = g.data() + static_cast<std::size_t>(x) * m;
        for (int a = 0; a < m; ++a) {
          if (!pol->supported(x, a)) continue;
          row[a] += wx * (mass * rc.p[a] - (rc.act[a] ? bp[a] : 0.0));
        }
      } else {
        for (int a = 0; a < m; ++a) {
          if (!(bp[a] > 0.0) || !rc.act[a]) continue;
          for (int j = 0; j < d; ++j)
            g[j] += wx * bp[a] * (rc.fmean[j] - pol->feature(x, a, j));
        }
      }
    }
  }
};

TabularPolicy resolve_baseline(const BanditInstance& inst, const PreferenceDataset& data,
                               const TrainerConfig& cfg) {
  switch (cfg.baseline) {
    case BaselineKind::Chosen:
      return chosen_policy(data, inst, cfg.baseline_smoothing);
    case BaselineKind::Ref:
      return inst.reference_policy;
    case BaselineKind::Custom:
      if (!cfg.custom_baseline) throw config_error("custom baseline requested but not provided");
      if (!cfg.custom_baseline->logits.same_shape(inst.reference_policy.logits))
        throw config_error("custom baseline shape mismatch");
      return *cfg.custom_baseline;
  }
  throw config_error("unknown baseline kind");
}

}  // namespace

void TrainerConfig::validate() const {
  if (!(beta > 0.0)) throw config_error("TrainerConfig: beta must be positive");
  if (!(eta >= 0.0)) throw config_error("TrainerConfig: eta must be nonnegative");
  if (!(learning_rate > 0.0)) throw config_error("TrainerConfig: learning rate must be positive");
  if (steps < 0) throw config_error("TrainerConfig: negative step count");
  if (batch < 0) throw config_error("TrainerConfig: negative batch size");
  if (!(baseline_smoothing >= 0.0)) throw config_error("TrainerConfig: negative smoothing");
  if (!(epsilon_floor > 0.0 && epsilon_floor < 1.0))
    throw config_error("TrainerConfig: epsilon floor must be in (0, 1)");
  if (log_every <= 0) throw config_error("TrainerConfig: log interval must be positive");
  if (baseline == BaselineKind::Custom && !custom_baseline)
    throw config_error("TrainerConfig: custom baseline missing");
}

double dpo_loss(const TabularPolicy& pol, const TabularPolicy& ref, const PreferenceDataset& data,
                double beta, double eps_floor) {
  if (data.size() == 0) throw std::domain_error("dpo_loss: empty dataset");
  const AggregatedData agg = AggregatedData::from(data);
  return Engine(pol, ref, beta, eps_floor).preference_loss(agg);
}

double sft_loss(const TabularPolicy& pol, const TabularPolicy& base, const PromptDistribution& d0,
                double eps_floor) {
  // The engine needs a reference for feasibility; the policy itself serves,
  // since the alignment term never looks at the reference.
  return Engine(pol, pol, 1.0, eps_floor).alignment_loss(base, d0);
}

RpoParts rpo_loss(const TabularPolicy& pol, const TabularPolicy& ref, const TabularPolicy& base,
                  const PreferenceDataset& data, const PromptDistribution& d0, double beta,
                  double eta, double eps_floor) {
  if (!(eta >= 0.0)) throw config_error("rpo_loss: eta must be nonnegative");
  RpoParts parts;
  parts.dpo_term = dpo_loss(pol, ref, data, beta, eps_floor);
  if (eta == 0.0) {
    parts.total = parts.dpo_term;
    return parts;
  }
  parts.sft_term = eta * beta * sft_loss(pol, base, d0, eps_floor);
  parts.total = parts.dpo_term + parts.sft_term;
  return parts;
}

std::vector<double> dpo_gradient(const TabularPolicy& pol, const TabularPolicy& ref,
                                 const PreferenceDataset& data, double beta, double eps_floor) {
  if (data.size() == 0) throw std::domain_error("dpo_gradient: empty dataset");
  const AggregatedData agg = AggregatedData::from(data);
  const Engine eng(pol, ref, beta, eps_floor);
  std::vector<double> g(eng.param_count(), 0.0);
  eng.add_preference_gradient(agg, g);
  return g;
}

std::vector<double> rpo_gradient(const TabularPolicy& pol, const TabularPolicy& ref,
                                 const TabularPolicy& base, const PreferenceDataset& data,
                                 const PromptDistribution& d0, double beta, double eta,
                                 double eps_floor) {
  if (!(eta >= 0.0)) throw config_error("rpo_gradient: eta must be nonnegative");
  std::vector<double> g = dpo_gradient(pol, ref, data, beta, eps_floor);
  if (eta == 0.0) return g;
  const Engine eng(pol, pol, 1.0, eps_floor);
  eng.add_alignment_gradient(base, d0, eta * beta, g);
  return g;
}

TrainResult train(const BanditInstance& inst, const PreferenceDataset& data,
                  const TrainerConfig& cfg, TrainMethod method) {
  cfg.validate();
  inst.validate();
  if (data.size() == 0) throw std::domain_error("train: empty dataset");
  const AggregatedData full = AggregatedData::from(data);
  const TabularPolicy& ref = inst.reference_policy;
  const TabularPolicy baseline = resolve_baseline(inst, data, cfg);
  const double eta = method == TrainMethod::Rpo ? cfg.eta : 0.0;

  TabularPolicy pol = ref;
  const TabularPolicy comparator = argmax_policy(inst);
  const double j_star = value(comparator, inst, inst.d0);
  SplitMix64 batch_rng(cfg.seed);

  TrainResult out;
  for (int step = 0;; ++step) {
    const Engine eng(pol, ref, cfg.beta, cfg.epsilon_floor);
    const double pref = eng.preference_loss(full);
    if (!std::isfinite(pref))
      throw solver_error("train: non-finite loss at step " + std::to_string(step));
    if (step % cfg.log_every == 0 || step == cfg.steps) {
      TraceRow row;
      row.step = step;
      row.dpo_term = pref;
      row.sft_term = eta == 0.0 ? 0.0 : eta * cfg.beta * eng.alignment_loss(baseline, inst.d0);
      row.rpo_loss = eta == 0.0 ? pref : pref + row.sft_term;
      row.mean_chosen_logprob = eng.chosen_logprob(full);
      double kl = 0.0;
      for (int x = 0; x < inst.num_prompts; ++x) kl += inst.d0.at(x) * kl_to_ref(pol, ref, x);
      row.mean_kl_to_ref = kl;
      row.j_pi = value(pol, inst, inst.d0);
      row.gap_vs_optimal = j_star - row.j_pi;
      out.trace.rows.push_back(row);
    }
    if (step == cfg.steps) break;

    std::vector<double> g(eng.param_count(), 0.0);
    if (cfg.batch > 0) {
      SplitMix64 step_rng = batch_rng.stream(static_cast<std::uint64_t>(step));
      std::vector<PreferenceTriple> sample;
      sample.reserve(static_cast<std::size_t>(cfg.batch));
      for (int i = 0; i < cfg.batch; ++i)
        sample.push_back(data.triples[static_cast<std::size_t>(step_rng.next_below(data.size()))]);
      const AggregatedData mini = AggregatedData::from_triples(sample);
      eng.add_preference_gradient(mini, g);
    } else {
      eng.add_preference_gradient(full, g);
    }
    if (eta != 0.0) eng.add_alignment_gradient(baseline, inst.d0, eta * cfg.beta, g);

    if (pol.feature_limited()) {
      std::vector<double> theta = pol.theta;
      for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= cfg.learning_rate * g[j];
      for (double v : theta)
        if (!std::isfinite(v))
          throw solver_error("train: non-finite parameters at step " + std::to_string(step + 1));
      pol.set_theta(theta);
    } else {
      const int m = pol.num_responses();
      for (int x = 0; x < pol.num_prompts(); ++x)
        for (int a = 0; a < m; ++a)
          if (pol.supported(x, a)) {
            double& l = pol.logits.at(x, a);
            l -= cfg.learning_rate * g[static_cast<std::size_t>(x) * m + a];
            if (!std::isfinite(l))
              throw solver_error("train: non-finite parameters at step " + std::to_string(step + 1));
          }
    }
  }
  out.policy = std::move(pol);
  out.baseline_used = baseline;
  return out;
}

void write_trace_csv(const TrainTrace& trace, const std::string& path) {
  std::ofstream outf(path, std::ios::binary | std::ios::trunc);
  if (!outf) throw io_error("cannot write " + path);
  outf << "step,rpo_loss,dpo_term,sft_term,mean_chosen_logprob,mean_kl_to_ref,J_pi,gap_vs_optimal\n";
  for (const TraceRow& r : trace.rows) {
    outf << r.step << ',' << format_double(r.rpo_loss) << ',' << format_double(r.dpo_term) << ','
         << format_double(r.sft_term) << ',' << format_double(r.mean_chosen_logprob) << ','
         << format_double(r.mean_kl_to_ref) << ',' << format_double(r.j_pi) << ','
         << format_double(r.gap_vs_optimal) << '\n';
  }
  if (!outf) throw io_error("write failed: " + path);
}

}  // namespace rpolab
