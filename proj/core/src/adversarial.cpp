#include "rpolab/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpolab/aggregate.hpp"
#include "rpolab/errors.hpp"
#include "rpolab/preference.hpp"
#include "rpolab/serialize.hpp"

namespace rpolab {
namespace {

constexpr double kRoundSlack = 1e-15;

// eta * sum_x d0(x) * (pol(a|x) - base(a|x)), the coefficient of r(x,a) in
// the joint objective, plus the policy-only KL part that the reward cannot
// touch.
struct PolicyPieces {
  Grid lin;
  double kl_const = 0.0;
};

PolicyPieces policy_pieces(const TabularPolicy& pol, const BanditInstance& inst,
                           const TabularPolicy& base, double beta, double eta) {
  PolicyPieces out;
  out.lin = Grid(inst.num_prompts, inst.num_responses, 0.0);
  for (int x = 0; x < inst.num_prompts; ++x) {
    const std::vector<double> p = pol.probs(x);
    const std::vector<double> b = base.probs(x);
    for (int a = 0; a < inst.num_responses; ++a)
      out.lin.at(x, a) = eta * inst.d0.at(x) * (p[a] - b[a]);
    out.kl_const -= eta * beta * inst.d0.at(x) * kl_to_ref(pol, inst.reference_policy, x);
  }
  return out;
}

double dot(const Grid& a, const Grid& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

// Projected gradient descent with backtracking on a smooth convex objective
// over the box [lower, bound]^cells.  `eval` and `grad` see the current
// table; iterate updates are monotone up to rounding slack.  Returns the
// number of iterations; the table is left at the solution.
template <class Eval, class Grad>
int box_descent(RewardTable& r, const RewardClassSpec& cls, double tol, int cap, Eval eval,
                Grad grad, std::vector<double>* trace) {
  double step = 1.0;
  double cur = eval(r);
  if (trace) trace->push_back(cur);
  for (int it = 0; it < cap; ++it) {
    const Grid g = grad(r);
    // First-order optimality: how far a unit gradient step can move inside
    // the box.
    double crit = 0.0;
    for (std::size_t i = 0; i < g.v.size(); ++i) {
      const double moved =
          std::min(cls.bound, std::max(cls.lower, r.values.v[i] - g.v[i]));
      crit = std::max(crit, std::fabs(moved - r.values.v[i]));
    }
    if (crit <= tol) return it;

    const double slack = kRoundSlack * (std::fabs(cur) + 1.0);
    bool moved_any = false;
    while (true) {
      RewardTable cand = r;
      double dist_sq = 0.0;
      for (std::size_t i = 0; i < g.v.size(); ++i) {
        double v = r.values.v[i] - step * g.v[i];
        v = std::min(cls.bound, std::max(cls.lower, v));
        const double d = v - r.values.v[i];
        dist_sq += d * d;
        cand.values.v[i] = v;
      }
      if (dist_sq == 0.0) break;  // box corner or step underflow: stalled
      const double next = eval(cand);
      if (next <= cur - dist_sq / (2.0 * step) + slack) {
        r = std::move(cand);
        cur = next;
        if (trace) trace->push_back(cur);
        step = std::min(step * 1.3, 1e6);
        moved_any = true;
        break;
      }
      step *= 0.5;
      if (step < 1e-18) break;
    }
    if (!moved_any) {
      // No representable step decreases the objective; re-test optimality
      // before declaring failure.
      double recrit = 0.0;
      const Grid g2 = grad(r);
      for (std::size_t i = 0; i < g2.v.size(); ++i) {
        const double moved =
            std::min(cls.bound, std::max(cls.lower, r.values.v[i] - g2.v[i]));
        recrit = std::max(recrit, std::fabs(moved - r.values.v[i]));
      }
      if (recrit <= tol * 10.0) return it;
      throw solver_error("box_descent: stalled with first-order measure " +
                         std::to_string(recrit));
    }
  }
  throw solver_error("box_descent: iteration cap reached");
}

RewardTable floor_table(const BanditInstance& inst, const RewardClassSpec& cls) {
  Grid g(inst.num_prompts, inst.num_responses, cls.lower);
  return RewardTable(std::move(g), std::max(cls.bound, cls.lower));
}

// Shared inner solve: min over the class of <lin, r> + data likelihood term,
// warm-started at `r`.
int inner_minimize(RewardTable& r, const Grid& lin, const AggregatedData& agg,
                   const RewardClassSpec& cls, double tol, int cap, std::vector<double>* trace) {
  const auto eval = [&](const RewardTable& t) { return dot(lin, t.values) + mle_loss(t, agg); };
  const auto grad = [&](const RewardTable& t) {
    Grid g = mle_gradient(t, agg);
    for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += lin.v[i];
    return g;
  };
  return box_descent(r, cls, tol, cap, eval, grad, trace);
}

nlohmann::json grid_json(const Grid& g) {
  nlohmann::json out;
  out["rows"] = g.rows;
  out["cols"] = g.cols;
  nlohmann::json vals = nlohmann::json::array();
  for (double v : g.v) vals.push_back(v);
  out["v"] = std::move(vals);
  return out;
}

}  // namespace

void RewardClassSpec::validate() const {
  if (!(bound > 0.0)) throw config_error("RewardClassSpec: bound must be positive");
  if (!(lower >= 0.0 && lower <= bound))
    throw config_error("RewardClassSpec: lower edge must lie in [0, bound]");
  if (!(grid_step > 0.0)) throw config_error("RewardClassSpec: grid_step must be positive");
}

void SolverOptions::validate() const {
  if (!(inner_tol > 0.0) || !(outer_tol > 0.0))
    throw config_error("SolverOptions: tolerances must be positive");
  if (max_inner_iters <= 0 || max_outer_iters <= 0)
    throw config_error("SolverOptions: iteration caps must be positive");
  if (!(certification_tol > 0.0))
    throw config_error("SolverOptions: certification_tol must be positive");
}

double phi(const TabularPolicy& pol, const RewardTable& r, const BanditInstance& inst,
           const TabularPolicy& base, const PreferenceDataset& data, double beta, double eta) {
  const PolicyPieces pieces = policy_pieces(pol, inst, base, beta, eta);
  return dot(pieces.lin, r.values) + pieces.kl_const + mle_loss(r, data);
}

Grid phi_policy_gradient(const TabularPolicy& pol, const BanditInstance& inst,
                         const TabularPolicy& base, const RewardTable& r, double beta,
                         double eta) {
  (void)base;  // the baseline term does not depend on the policy
  Grid g(inst.num_prompts, inst.num_responses, 0.0);
  for (int x = 0; x < inst.num_prompts; ++x) {
    const std::vector<double> p = pol.probs(x);
    const std::vector<double> lp = pol.log_probs(x);
    const std::vector<double> lref = inst.reference_policy.log_probs(x);
    double mean_r = 0.0;
    double klx = 0.0;
    for (int a = 0; a < inst.num_responses; ++a) {
      if (!pol.supported(x, a)) continue;
      mean_r += p[a] * r.at(x, a);
      klx += p[a] * (lp[a] - lref[a]);
    }
    for (int a = 0; a < inst.num_responses; ++a) {
      if (!pol.supported(x, a)) continue;
      const double reward_part = r.at(x, a) - mean_r;
      const double kl_part = (lp[a] - lref[a]) - klx;
      g.at(x, a) = eta * inst.d0.at(x) * p[a] * (reward_part - beta * kl_part);
    }
  }
  return g;
}

InnerSolution t_adv(const TabularPolicy& pol, const BanditInstance& inst,
                    const TabularPolicy& base, const PreferenceDataset& data,
                    const RewardClassSpec& cls, double beta, double eta,
                    const SolverOptions& opts) {
  cls.validate();
  opts.validate();
  const AggregatedData agg = AggregatedData::from(data);
  const PolicyPieces pieces = policy_pieces(pol, inst, base, beta, eta);
  RewardTable r = floor_table(inst, cls);
  InnerSolution out;
  out.iterations =
      inner_minimize(r, pieces.lin, agg, cls, opts.inner_tol, opts.max_inner_iters, nullptr);
  out.value = dot(pieces.lin, r.values) + mle_loss(r, agg) + pieces.kl_const;
  out.reward = std::move(r);
  return out;
}

double minimax_objective(const RewardTable& r, const BanditInstance& inst,
                         const TabularPolicy& base, const PreferenceDataset& data, double beta,
                         double eta) {
  const KlOptimalPolicy best = optimal_kl_policy(r, inst.reference_policy, beta);
  double out = mle_loss(r, data);
  for (int x = 0; x < inst.num_prompts; ++x) {
    const std::vector<double> b = base.probs(x);
    double base_r = 0.0;
    for (int a = 0; a < inst.num_responses; ++a) base_r += b[a] * r.at(x, a);
    out += eta * inst.d0.at(x) * (beta * best.log_partition[x] - base_r);
  }
  return out;
}

Grid minimax_gradient(const RewardTable& r, const BanditInstance& inst, const TabularPolicy& base,
                      const PreferenceDataset& data, double beta, double eta) {
  const KlOptimalPolicy best = optimal_kl_policy(r, inst.reference_policy, beta);
  Grid g = mle_gradient(r, data);
  for (int x = 0; x < inst.num_prompts; ++x) {
    const std::vector<double> p = best.policy.probs(x);
    const std::vector<double> b = base.probs(x);
    for (int a = 0; a < inst.num_responses; ++a)
      g.at(x, a) += eta * inst.d0.at(x) * (p[a] - b[a]);
  }
  return g;
}

SolveReport solve_maximin(const BanditInstance& inst, const TabularPolicy& base,
                          const PreferenceDataset& data, const RewardClassSpec& cls, double beta,
                          double eta, const SolverOptions& opts) {
  cls.validate();
  opts.validate();
  inst.validate();
  const AggregatedData agg = AggregatedData::from(data);
  const int m = inst.num_responses;

  TabularPolicy pol = inst.reference_policy;
  RewardTable reward = floor_table(inst, cls);
  int inner_total = 0;

  const auto inner_value = [&](const TabularPolicy& p, RewardTable& warm, double tol) {
    const PolicyPieces pieces = policy_pieces(p, inst, base, beta, eta);
    inner_total += inner_minimize(warm, pieces.lin, agg, cls, tol, opts.max_inner_iters, nullptr);
    return dot(pieces.lin, warm.values) + mle_loss(warm, agg) + pieces.kl_const;
  };

  double current = inner_value(pol, reward, opts.inner_tol);
  // Value resolution of the inner oracle: first-order tolerance times the
  // box diameter bounds how far the reported minimum can sit above the true
  // one.
  const double cells = static_cast<double>(inst.num_prompts) * m;
  const double noise =
      10.0 * opts.inner_tol * (1.0 + (cls.bound - cls.lower) * std::sqrt(cells));

  SolveReport rep;
  rep.inner_tolerance = opts.inner_tol;
  rep.outer_tolerance = opts.outer_tol;
  if (opts.record_trace) rep.objective_trace.push_back(current);

  double step = 1.0;
  int outer = 0;
  for (; outer < opts.max_outer_iters; ++outer) {
    const Grid g = phi_policy_gradient(pol, inst, base, reward, beta, eta);
    double gmax = 0.0, gsq = 0.0;
    for (double v : g.v) {
      gmax = std::max(gmax, std::fabs(v));
      gsq += v * v;
    }
    if (gmax <= opts.outer_tol) break;

    bool accepted = false;
    double trial = std::min(step * 2.0, 1e3);  // let the step regrow after backoffs
    while (trial * gsq >= noise) {  // otherwise progress is smaller than the oracle can certify
      Grid cand_logits = pol.logits;
      for (int x = 0; x < inst.num_prompts; ++x)
        for (int a = 0; a < m; ++a)
          if (pol.supported(x, a)) cand_logits.at(x, a) += trial * g.at(x, a);
      const TabularPolicy cand = TabularPolicy::from_logits(cand_logits, pol.support);
      RewardTable warm = reward;
      const double cand_value = inner_value(cand, warm, opts.inner_tol);
      if (cand_value >= current + 1e-4 * trial * gsq - kRoundSlack * (std::fabs(current) + 1.0)) {
        pol = cand;
        reward = std::move(warm);
        current = cand_value;
        step = trial;
        accepted = true;
        break;
      }
      trial *= 0.5;  // oscillation guard: back the step off and retry
    }
    if (!accepted) break;  // converged to the precision the inner solves support
    if (opts.record_trace) rep.objective_trace.push_back(current);
  }
  if (outer == opts.max_outer_iters)
    throw solver_error("solve_maximin: outer iteration cap reached");

  rep.maximin_value = current;
  rep.recovered_policy = pol;
  rep.adversarial_reward = reward;
  rep.centered_reward = center_rewards(reward.values, base);
  rep.inner_iterations = inner_total;
  rep.outer_iterations = outer;
  return rep;
}

SolveReport solve_minimax(const BanditInstance& inst, const TabularPolicy& base,
                          const PreferenceDataset& data, const RewardClassSpec& cls, double beta,
                          double eta, const SolverOptions& opts) {
  cls.validate();
  opts.validate();
  inst.validate();
  const AggregatedData agg = AggregatedData::from(data);

  const auto eval = [&](const RewardTable& t) {
    const KlOptimalPolicy best = optimal_kl_policy(t, inst.reference_policy, beta);
    double out = mle_loss(t, agg);
    for (int x = 0; x < inst.num_prompts; ++x) {
      const std::vector<double> b = base.probs(x);
      double base_r = 0.0;
      for (int a = 0; a < inst.num_responses; ++a) base_r += b[a] * t.at(x, a);
      out += eta * inst.d0.at(x) * (beta * best.log_partition[x] - base_r);
    }
    return out;
  };
  const auto grad = [&](const RewardTable& t) {
    const KlOptimalPolicy best = optimal_kl_policy(t, inst.reference_policy, beta);
    Grid g = mle_gradient(t, agg);
    for (int x = 0; x < inst.num_prompts; ++x) {
      const std::vector<double> p = best.policy.probs(x);
      const std::vector<double> b = base.probs(x);
      for (int a = 0; a < inst.num_responses; ++a)
        g.at(x, a) += eta * inst.d0.at(x) * (p[a] - b[a]);
    }
    return g;
  };

  SolveReport rep;
  rep.inner_tolerance = opts.inner_tol;
  rep.outer_tolerance = opts.outer_tol;

  RewardTable r = floor_table(inst, cls);
  rep.inner_iterations =
      box_descent(r, cls, opts.inner_tol, opts.max_inner_iters, eval, grad,
                  opts.record_trace ? &rep.objective_trace : nullptr);
  rep.minimax_value = eval(r);
  rep.recovered_policy = optimal_kl_policy(r, inst.reference_policy, beta).policy;
  rep.adversarial_reward = r;
  rep.centered_reward = center_rewards(r.values, base);
  return rep;
}

SolveReport duality_gap(const BanditInstance& inst, const TabularPolicy& base,
                        const PreferenceDataset& data, const RewardClassSpec& cls, double beta,
                        double eta, const SolverOptions& opts) {
  const SolveReport lo = solve_maximin(inst, base, data, cls, beta, eta, opts);
  SolveReport rep = solve_minimax(inst, base, data, cls, beta, eta, opts);
  rep.maximin_value = lo.maximin_value;
  rep.duality_gap = std::fabs(rep.maximin_value - rep.minimax_value);
  rep.inner_iterations += lo.inner_iterations;
  rep.outer_iterations = lo.outer_iterations;
  rep.t_adv_at_recovered =
      t_adv(rep.recovered_policy, inst, base, data, cls, beta, eta, opts).value;
  if (rep.duality_gap > opts.certification_tol)
    throw certification_error("duality certificate failed: |" +
                              std::to_string(rep.maximin_value) + " - " +
                              std::to_string(rep.minimax_value) + "| = " +
                              std::to_string(rep.duality_gap) + " exceeds " +
                              std::to_string(opts.certification_tol));
  rep.certified = true;
  return rep;
}

TheoryHyperparams theory_hyperparams(long n, double delta, double bound, int k, int m,
                                     bool proof_constants) {
  if (n < 1) throw config_error("theory_hyperparams: need n >= 1");
  if (!(bound > 0.0)) throw config_error("theory_hyperparams: bound must be positive");
  if (k < 1 || m < 1) throw config_error("theory_hyperparams: need k >= 1 and m >= 1");
  if (!(delta > 0.0) || delta >= std::exp(-1.0))
    throw config_error("theory_hyperparams: delta must lie in (0, 1/e)");

  TheoryHyperparams out;
  out.n = n;
  out.delta = delta;
  out.bound = bound;
  const double nn = static_cast<double>(n);
  const double one_plus = 1.0 + std::exp(bound);
  out.epsilon = 1.0 / (6.0 * one_plus * nn);
  const double balls = std::max(1.0, std::ceil(bound / (2.0 * out.epsilon)));
  out.log_cover = static_cast<double>(k) * m * std::log(balls);
  const double log_with_delta = out.log_cover + std::log(1.0 / delta);
  out.iota = std::sqrt(log_with_delta);
  out.beta = 1.0 / std::sqrt(nn);
  out.eta = proof_constants
                ? 2.0 * std::sqrt(6.0) * std::sqrt(log_with_delta / nn)
                : std::sqrt(24.0 * log_with_delta / nn) / (one_plus * one_plus);
  return out;
}

Grid center_rewards(const Grid& reward, const TabularPolicy& base) {
  Grid out = reward;
  for (int x = 0; x < reward.rows; ++x) {
    const std::vector<double> b = base.probs(x);
    double mean = 0.0;
    for (int a = 0; a < reward.cols; ++a) mean += b[a] * reward.at(x, a);
    for (int a = 0; a < reward.cols; ++a) out.at(x, a) -= mean;
  }
  return out;
}

std::string report_to_json(const SolveReport& report) {
  nlohmann::json j;
  if (std::isfinite(report.maximin_value)) j["maximin_value"] = report.maximin_value;
  if (std::isfinite(report.minimax_value)) j["minimax_value"] = report.minimax_value;
  if (std::isfinite(report.duality_gap)) j["duality_gap"] = report.duality_gap;
  if (std::isfinite(report.t_adv_at_recovered))
    j["t_adv_at_recovered"] = report.t_adv_at_recovered;
  j["certified"] = report.certified;
  j["inner_iterations"] = report.inner_iterations;
  j["outer_iterations"] = report.outer_iterations;
  j["inner_tolerance"] = report.inner_tolerance;
  j["outer_tolerance"] = report.outer_tolerance;

  nlohmann::json pol;
  pol["logits"] = grid_json(report.recovered_policy.logits);
  nlohmann::json sup = nlohmann::json::array();
  for (std::uint8_t s : report.recovered_policy.support) sup.push_back(static_cast<int>(s));
  pol["support"] = std::move(sup);
  j["recovered_policy"] = std::move(pol);

  nlohmann::json rt;
  rt["values"] = grid_json(report.adversarial_reward.values);
  rt["bound"] = report.adversarial_reward.bound;
  j["adversarial_reward"] = std::move(rt);
  j["centered_reward"] = grid_json(report.centered_reward);

  if (!report.objective_trace.empty()) j["objective_trace"] = report.objective_trace;
  return j.dump(2) + "\n";
}

void write_report_json(const SolveReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path);
  out << report_to_json(report);
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace rpolab
