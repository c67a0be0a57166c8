#include "rpolab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "rpolab/aggregate.hpp"
#include "rpolab/errors.hpp"
#include "rpolab/preference.hpp"
#include "rpolab/rng.hpp"
#include "rpolab/serialize.hpp"

namespace rpolab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Below this, a numerator or denominator counts as zero.  Grid arithmetic can
// leave ~1e-17 residue where the paired differences cancel exactly in exact
// arithmetic, so the cutoff sits well above rounding noise and well below any
// genuinely nonzero value (which is at least one grid step times a pair
// weight).
constexpr double kZeroFloor = 1e-12;

struct PairWeight {
  int x, a1, a0;
  double mu;
};

std::vector<PairWeight> positive_pairs(const BanditInstance& inst) {
  std::vector<PairWeight> out;
  for (int x = 0; x < inst.num_prompts; ++x) {
    for (int a1 = 0; a1 < inst.num_responses; ++a1) {
      for (int a0 = 0; a0 < inst.num_responses; ++a0) {
        if (a1 == a0) continue;
        const double mu = inst.pair_prob(x, a1, a0);
        if (mu > 0.0) out.push_back({x, a1, a0, mu});
      }
    }
  }
  return out;
}

// Everything fixed about a coverage query: the linear numerator functional
// and the data-collection second moment, both applied to the deviation
// delta = r_true - r.
struct CoverageProblem {
  Grid coeff;                    // numerator weights d0(x) * (pol - base)
  std::vector<PairWeight> mu;    // denominator pair weights
  const Grid* truth;             // r_true values
  double num_const = 0.0;        // numerator at r = 0 (coeff dot truth)

  double numerator(const Grid& r) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < r.v.size(); ++i) acc += coeff.v[i] * r.v[i];
    return num_const - acc;
  }

  double den_sq(const Grid& r) const {
    double acc = 0.0;
    for (const PairWeight& p : mu) {
      const double diff = (truth->at(p.x, p.a1) - truth->at(p.x, p.a0)) -
                          (r.at(p.x, p.a1) - r.at(p.x, p.a0));
      acc += p.mu * diff * diff;
    }
    return acc;
  }
};

CoverageProblem make_problem(const BanditInstance& inst, const TabularPolicy& pol,
                             const TabularPolicy& base) {
  CoverageProblem prob;
  prob.coeff = Grid(inst.num_prompts, inst.num_responses);
  for (int x = 0; x < inst.num_prompts; ++x) {
    const std::vector<double> p = pol.probs(x);
    const std::vector<double> b = base.probs(x);
    for (int a = 0; a < inst.num_responses; ++a) {
      prob.coeff.at(x, a) = inst.d0.at(x) * (p[static_cast<std::size_t>(a)] -
                                             b[static_cast<std::size_t>(a)]);
    }
  }
  prob.mu = positive_pairs(inst);
  prob.truth = &inst.true_reward.values;
  prob.num_const = 0.0;
  for (std::size_t i = 0; i < prob.coeff.v.size(); ++i) {
    prob.num_const += prob.coeff.v[i] * prob.truth->v[i];
  }
  return prob;
}

// Ratio with the zero conventions; NaN marks "skip this candidate".
double coverage_ratio(const CoverageProblem& prob, const Grid& r) {
  const double num = prob.numerator(r);
  const double den = std::sqrt(std::max(0.0, prob.den_sq(r)));
  if (den <= kZeroFloor) {
    if (num > kZeroFloor) return kInf;
    return kNaN;
  }
  return num / den;
}

// Exhaustive search over the box grid.  The ratio only depends on per-prompt
// centered deviations (the numerator weights sum to zero within a prompt and
// the denominator sees pairwise differences), so it is enough to walk the
// faces where some entry sits at the lower edge; every grid point's shift
// representative is itself a grid point.
double coverage_grid(const CoverageProblem& prob, const RewardClassSpec& cls, int num_responses,
                     int* evals) {
  const int steps = static_cast<int>(std::lround((cls.bound - cls.lower) / cls.grid_step));
  std::vector<double> levels(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) levels[static_cast<std::size_t>(i)] = cls.lower + i * cls.grid_step;
  levels.back() = cls.bound;

  Grid r(1, num_responses, cls.lower);
  double best = -kInf;
  std::vector<int> idx(static_cast<std::size_t>(num_responses), 0);
  for (int pinned = 0; pinned < num_responses; ++pinned) {
    std::fill(idx.begin(), idx.end(), 0);
    r.v.assign(r.v.size(), cls.lower);
    bool done = false;
    while (!done) {
      const double ratio = coverage_ratio(prob, r);
      ++*evals;
      if (std::isinf(ratio)) return kInf;
      if (!std::isnan(ratio)) best = std::max(best, ratio);
      // Odometer over every coordinate except the pinned one.
      done = true;
      for (int a = 0; a < num_responses; ++a) {
        if (a == pinned) continue;
        std::size_t ai = static_cast<std::size_t>(a);
        if (idx[ai] < steps) {
          ++idx[ai];
          r.v[ai] = levels[static_cast<std::size_t>(idx[ai])];
          done = false;
          break;
        }
        idx[ai] = 0;
        r.v[ai] = levels[0];
      }
    }
  }
  return best;
}

// Projected gradient ascent on the ratio from a strictly covered start.
double coverage_refine(const CoverageProblem& prob, const RewardClassSpec& cls, Grid r,
                       double current) {
  const std::size_t n = r.v.size();
  Grid grad(r.rows, r.cols);
  double step = 0.1 * (cls.bound - cls.lower);
  for (int iter = 0; iter < 200; ++iter) {
    const double num = prob.numerator(r);
    const double den2 = prob.den_sq(r);
    if (den2 <= kZeroFloor * kZeroFloor) return num > kZeroFloor ? kInf : current;
    const double den = std::sqrt(den2);

    // d(num/den) = (grad_num * den - num * grad_den) / den^2 with
    // grad_num = -coeff and grad_den = grad(den^2) / (2 den).
    std::fill(grad.v.begin(), grad.v.end(), 0.0);
    for (const PairWeight& p : prob.mu) {
      const double diff = (prob.truth->at(p.x, p.a1) - prob.truth->at(p.x, p.a0)) -
                          (r.at(p.x, p.a1) - r.at(p.x, p.a0));
      grad.at(p.x, p.a1) -= 2.0 * p.mu * diff;
      grad.at(p.x, p.a0) += 2.0 * p.mu * diff;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double gden = grad.v[i] / (2.0 * den);
      grad.v[i] = (-prob.coeff.v[i] * den - num * gden) / den2;
    }

    bool improved = false;
    Grid trial = r;
    while (step > 1e-14) {
      for (std::size_t i = 0; i < n; ++i) {
        trial.v[i] = std::clamp(r.v[i] + step * grad.v[i], cls.lower, cls.bound);
      }
      const double cand = coverage_ratio(prob, trial);
      if (std::isinf(cand)) return kInf;
      if (!std::isnan(cand) && cand > current + 1e-13) {
        r = trial;
        current = cand;
        step *= 1.5;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return current;
}

double median_sorted(std::vector<double>& v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  if (m % 2 == 1) return v[m / 2];
  return 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

// Linear interpolation quantile of an already sorted sample.
double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return kNaN;
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return (1.0 - frac) * v[lo] + frac * v[hi];
}

double softplus(double z) {
  // ln(1 + e^z) without overflow.
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

nlohmann::json row_json(const Figure1Row& row) {
  return {{"name", row.name},
          {"probs", {row.probs[0], row.probs[1], row.probs[2]}},
          {"expected_reward", row.j}};
}

}  // namespace

CoverageReport coverage_from_candidates(const BanditInstance& inst,
                                        const std::vector<RewardTable>& candidates,
                                        const TabularPolicy& pol, const TabularPolicy& base) {
  inst.validate();
  const CoverageProblem prob = make_problem(inst, pol, base);
  double best = -kInf;
  for (const RewardTable& r : candidates) {
    if (r.values.rows != inst.num_prompts || r.values.cols != inst.num_responses) {
      throw config_error("coverage: candidate table shape does not match the instance");
    }
    const double ratio = coverage_ratio(prob, r.values);
    if (std::isnan(ratio)) continue;
    best = std::max(best, ratio);
    if (std::isinf(best)) break;
  }
  CoverageReport report;
  report.value = std::max(0.0, best);
  report.mode = "candidates";
  report.candidates_used = static_cast<int>(candidates.size());
  return report;
}

CoverageReport coverage_coefficient(const BanditInstance& inst, const RewardClassSpec& cls,
                                    const TabularPolicy& pol, const TabularPolicy& base,
                                    int num_samples, bool refine, std::uint64_t seed) {
  inst.validate();
  cls.validate();
  if (num_samples < 1) throw config_error("coverage: num_samples must be at least 1");
  const CoverageProblem prob = make_problem(inst, pol, base);
  CoverageReport report;

  if (inst.num_prompts == 1 && inst.num_responses <= 4) {
    int evals = 0;
    const double best = coverage_grid(prob, cls, inst.num_responses, &evals);
    report.value = std::max(0.0, best);
    report.mode = "grid";
    report.candidates_used = evals;
    return report;
  }

  SplitMix64 rng(seed);
  const std::size_t cells =
      static_cast<std::size_t>(inst.num_prompts) * static_cast<std::size_t>(inst.num_responses);
  Grid r(inst.num_prompts, inst.num_responses);
  Grid best_point = r;
  double best = -kInf;
  int used = 0;

  auto consider = [&](const Grid& point) {
    const double ratio = coverage_ratio(prob, point);
    ++used;
    if (std::isnan(ratio)) return;
    if (ratio > best) {
      best = ratio;
      best_point = point;
    }
  };

  // Structured corners first, then uniform draws from the box.
  r.v.assign(cells, cls.lower);
  consider(r);
  r.v.assign(cells, cls.bound);
  consider(r);
  for (std::size_t i = 0; i < cells; ++i) r.v[i] = std::clamp(prob.truth->v[i], cls.lower, cls.bound);
  consider(r);
  for (int s = 0; s < num_samples && !std::isinf(best); ++s) {
    for (std::size_t i = 0; i < cells; ++i) {
      r.v[i] = cls.lower + (cls.bound - cls.lower) * rng.next_double();
    }
    consider(r);
  }

  if (refine && std::isfinite(best)) {
    best = coverage_refine(prob, cls, best_point, best);
  }
  report.value = std::max(0.0, best);
  report.mode = "sampled";
  report.candidates_used = used;
  return report;
}

double density_ratio(const PromptDistribution& d0, const PromptDistribution& d1) {
  d0.validate();
  d1.validate();
  if (d0.num_prompts() != d1.num_prompts()) {
    throw config_error("density_ratio: prompt distributions have different sizes");
  }
  double sup = 0.0;
  for (int x = 0; x < d0.num_prompts(); ++x) {
    const double p1 = d1.at(x);
    if (p1 == 0.0) continue;  // 0/0 and 0/positive both contribute nothing
    const double p0 = d0.at(x);
    if (p0 == 0.0) return kInf;
    sup = std::max(sup, p1 / p0);
  }
  return sup;
}

ShiftCheck prompt_shift_check(const BanditInstance& inst, const TabularPolicy& pol_hat,
                              const PromptDistribution& d1) {
  inst.validate();
  pol_hat.validate();
  d1.validate();
  if (pol_hat.num_prompts() != inst.num_prompts || pol_hat.num_responses() != inst.num_responses) {
    throw config_error("prompt_shift_check: policy shape does not match the instance");
  }
  if (d1.num_prompts() != inst.num_prompts) {
    throw config_error("prompt_shift_check: shifted distribution size does not match the instance");
  }
  for (int x = 0; x < inst.num_prompts; ++x) {
    for (int a = 0; a < inst.num_responses; ++a) {
      if (pol_hat.supported(x, a) && !inst.reference_policy.supported(x, a)) {
        throw config_error("prompt_shift_check: policy leaves the reference support");
      }
    }
  }

  const TabularPolicy comparator = argmax_policy(inst);
  // Per-prompt shortfall vs the argmax comparator; nonnegative because both
  // policies mix over the reference support, where the comparator picks the
  // best response.  That makes the density-ratio bound pointwise.
  std::vector<double> shortfall(static_cast<std::size_t>(inst.num_prompts));
  for (int x = 0; x < inst.num_prompts; ++x) {
    const std::vector<double> pc = comparator.probs(x);
    const std::vector<double> ph = pol_hat.probs(x);
    double g = 0.0;
    for (int a = 0; a < inst.num_responses; ++a) {
      g += (pc[static_cast<std::size_t>(a)] - ph[static_cast<std::size_t>(a)]) *
           inst.true_reward.values.at(x, a);
    }
    shortfall[static_cast<std::size_t>(x)] = g;
  }

  ShiftCheck out;
  double unshifted = 0.0;
  for (int x = 0; x < inst.num_prompts; ++x) {
    out.shifted_gap += d1.at(x) * shortfall[static_cast<std::size_t>(x)];
    unshifted += inst.d0.at(x) * shortfall[static_cast<std::size_t>(x)];
  }
  const double ratio = density_ratio(inst.d0, d1);
  out.bound = std::isinf(ratio) ? kInf : ratio * unshifted;
  if (!(out.shifted_gap <= out.bound + 1e-9)) {
    throw solver_error("prompt_shift_check: density-ratio bound violated (shifted " +
                       format_double(out.shifted_gap) + " vs bound " + format_double(out.bound) +
                       ")");
  }
  return out;
}

std::string to_string(SweepMethod m) {
  switch (m) {
    case SweepMethod::Maximin: return "maximin";
    case SweepMethod::Minimax: return "minimax";
    case SweepMethod::Rpo: return "rpo";
    case SweepMethod::Dpo: return "dpo";
  }
  throw config_error("unknown sweep method");
}

std::string to_string(HyperMode m) {
  switch (m) {
    case HyperMode::Theory: return "theory";
    case HyperMode::Fixed: return "fixed";
  }
  throw config_error("unknown hyperparameter mode");
}

SweepMethod sweep_method_from_string(const std::string& s) {
  if (s == "maximin") return SweepMethod::Maximin;
  if (s == "minimax") return SweepMethod::Minimax;
  if (s == "rpo") return SweepMethod::Rpo;
  if (s == "dpo") return SweepMethod::Dpo;
  throw config_error("unknown sweep method '" + s +
                     "' (expected maximin, minimax, rpo, or dpo)");
}

HyperMode hyper_mode_from_string(const std::string& s) {
  if (s == "theory") return HyperMode::Theory;
  if (s == "fixed") return HyperMode::Fixed;
  throw config_error("unknown hyperparameter mode '" + s + "' (expected theory or fixed)");
}

void SweepConfig::validate() const {
  if (n_grid.empty()) throw config_error("sweep: n_grid must be nonempty");
  int prev = 0;
  for (int n : n_grid) {
    if (n < 1) throw config_error("sweep: sample sizes must be positive");
    if (n <= prev) throw config_error("sweep: n_grid must be strictly increasing");
    prev = n;
  }
  if (seeds_per_n < 1) throw config_error("sweep: seeds_per_n must be at least 1");
  instance.validate();
  reward_class.validate();
  solver.validate();
  trainer.validate();
  if (!(fixed_beta > 0.0)) throw config_error("sweep: fixed_beta must be positive");
  if (fixed_eta < 0.0) throw config_error("sweep: fixed_eta must be nonnegative");
  if (!(delta > 0.0)) throw config_error("sweep: delta must be positive");
  if (baseline_smoothing < 0.0) throw config_error("sweep: baseline_smoothing must be nonnegative");
}

SweepResult gap_sweep(const SweepConfig& cfg) {
  cfg.validate();
  SweepResult result;
  result.method = cfg.method;
  result.n_values = cfg.n_grid;

  const TabularPolicy comparator = argmax_policy(cfg.instance);
  for (int x = 0; x < cfg.instance.num_prompts; ++x) {
    result.comparator_kl +=
        cfg.instance.d0.at(x) * kl_to_ref(comparator, cfg.instance.reference_policy, x);
  }

  const SplitMix64 master(cfg.seed);
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    const int n = cfg.n_grid[ni];
    for (int s = 0; s < cfg.seeds_per_n; ++s) {
      const std::uint64_t cell_index =
          static_cast<std::uint64_t>(ni) * static_cast<std::uint64_t>(cfg.seeds_per_n) +
          static_cast<std::uint64_t>(s);
      SplitMix64 rng = master.stream(cell_index);
      PreferenceDataset data = generate_dataset(cfg.instance, n, rng);

      double eta = cfg.fixed_eta;
      double beta = cfg.fixed_beta;
      if (cfg.hyper_mode == HyperMode::Theory) {
        const TheoryHyperparams th = theory_hyperparams(
            n, cfg.delta, cfg.reward_class.bound, cfg.instance.num_prompts,
            cfg.instance.num_responses);
        eta = th.eta;
        beta = th.beta;
      }

      SweepCell cell;
      cell.n = n;
      cell.seed = s;
      cell.eta = cfg.method == SweepMethod::Dpo ? 0.0 : eta;
      cell.beta = beta;
      cell.status = "ok";
      try {
        TabularPolicy fitted;
        switch (cfg.method) {
          case SweepMethod::Maximin:
          case SweepMethod::Minimax: {
            const TabularPolicy base =
                chosen_policy(data, cfg.instance, cfg.baseline_smoothing);
            const SolveReport rep =
                cfg.method == SweepMethod::Maximin
                    ? solve_maximin(cfg.instance, base, data, cfg.reward_class, beta, eta,
                                    cfg.solver)
                    : solve_minimax(cfg.instance, base, data, cfg.reward_class, beta, eta,
                                    cfg.solver);
            fitted = rep.recovered_policy;
            break;
          }
          case SweepMethod::Rpo:
          case SweepMethod::Dpo: {
            TrainerConfig tc = cfg.trainer;
            tc.beta = beta;
            tc.eta = eta;
            tc.seed = rng.next_u64();
            const TrainResult tr =
                train(cfg.instance, data, tc,
                      cfg.method == SweepMethod::Rpo ? TrainMethod::Rpo : TrainMethod::Dpo);
            fitted = tr.policy;
            break;
          }
        }
        cell.gap = gap(fitted, comparator, cfg.instance, cfg.instance.d0);
      } catch (const solver_error&) {
        cell.status = "failed";
        ++result.failures;
      } catch (const certification_error&) {
        cell.status = "failed";
        ++result.failures;
      }
      result.cells.push_back(cell);
    }
  }

  // Per-n medians and quartiles over the successful cells only.
  std::vector<double> ln_n, ln_med;
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    std::vector<double> gaps;
    for (const SweepCell& cell : result.cells) {
      if (cell.n == cfg.n_grid[ni] && cell.status == "ok") gaps.push_back(cell.gap);
    }
    const double med = median_sorted(gaps);
    result.medians.push_back(med);
    result.q25.push_back(quantile_sorted(gaps, 0.25));
    result.q75.push_back(quantile_sorted(gaps, 0.75));
    if (std::isfinite(med) && med > 0.0) {
      ln_n.push_back(std::log(static_cast<double>(cfg.n_grid[ni])));
      ln_med.push_back(std::log(med));
    }
  }

  const std::size_t pts = ln_n.size();
  if (pts >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < pts; ++i) {
      mx += ln_n[i];
      my += ln_med[i];
    }
    mx /= static_cast<double>(pts);
    my /= static_cast<double>(pts);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < pts; ++i) {
      sxx += (ln_n[i] - mx) * (ln_n[i] - mx);
      sxy += (ln_n[i] - mx) * (ln_med[i] - my);
    }
    result.slope = sxy / sxx;
    result.intercept = my - result.slope * mx;
    if (pts >= 3) {
      double ssr = 0.0;
      for (std::size_t i = 0; i < pts; ++i) {
        const double resid = ln_med[i] - (result.intercept + result.slope * ln_n[i]);
        ssr += resid * resid;
      }
      result.slope_stderr = std::sqrt(ssr / static_cast<double>(pts - 2) / sxx);
      result.slope_ci_half = 1.96 * result.slope_stderr;
    }
  }
  return result;
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
  std::ostringstream out;
  out << "N,seed,gap,method,eta,beta,status\n";
  for (const SweepCell& cell : result.cells) {
    out << cell.n << ',' << cell.seed << ',' << format_double(cell.gap) << ','
        << to_string(result.method) << ',' << format_double(cell.eta) << ','
        << format_double(cell.beta) << ',' << cell.status << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw io_error("cannot open '" + path + "' for writing");
  file << out.str();
  if (!file) throw io_error("failed writing '" + path + "'");
}

void write_sweep_gnuplot(const SweepResult& result, const std::string& csv_path,
                         const std::string& path) {
  std::ostringstream out;
  out << "# log-log view of the suboptimality-gap sweep\n"
      << "set datafile separator ','\n"
      << "set logscale xy\n"
      << "set xlabel 'comparisons N'\n"
      << "set ylabel 'gap vs argmax comparator'\n"
      << "set key left bottom\n";
  if (std::isfinite(result.slope)) {
    out << "fit_gap(x) = " << format_double(std::exp(result.intercept)) << " * x**("
        << format_double(result.slope) << ")\n"
        << "plot '" << csv_path << "' every ::1 using 1:3 with points pt 7 ps 0.5 "
        << "title 'per-seed gap', fit_gap(x) with lines lw 2 title 'fitted slope "
        << format_double(result.slope) << "'\n";
  } else {
    out << "plot '" << csv_path << "' every ::1 using 1:3 with points pt 7 ps 0.5 "
        << "title 'per-seed gap'\n";
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw io_error("cannot open '" + path + "' for writing");
  file << out.str();
  if (!file) throw io_error("failed writing '" + path + "'");
}

BanditInstance figure1_instance() {
  BanditInstance inst;
  inst.num_prompts = 1;
  inst.num_responses = 3;
  Grid truth(1, 3);
  truth.v = {1.0, 0.5, 0.0};
  inst.true_reward = RewardTable{std::move(truth), 1.0};
  Grid ref_probs(1, 3);
  ref_probs.v = {0.45, 0.45, 0.1};
  inst.reference_policy = TabularPolicy::from_probs(ref_probs);
  inst.d0 = PromptDistribution::uniform(1);
  inst.behavior.kind = BehaviorSpec::Kind::FixedPairs;
  inst.behavior.prompt_weights = inst.d0;
  inst.behavior.pairs = {{0, 1}};
  inst.validate();
  return inst;
}

PreferenceDataset figure1_dataset() {
  PreferenceDataset data;
  data.triples = {PreferenceTriple{0, 0, 1, 1}};
  data.seed = 0;
  return data;
}

Figure1Report figure1_study(const std::vector<double>& eta_grid, double beta, int steps) {
  if (!(beta > 0.0)) throw config_error("figure1: beta must be positive");
  if (steps < 1) throw config_error("figure1: steps must be at least 1");
  for (double eta : eta_grid) {
    if (eta < 0.0) throw config_error("figure1: alignment weights must be nonnegative");
  }

  const BanditInstance inst = figure1_instance();
  const PreferenceDataset data = figure1_dataset();

  Figure1Report report;
  report.eta_grid = eta_grid;
  report.beta = beta;
  report.steps = steps;

  auto make_row = [&](const std::string& name, const TabularPolicy& pol) {
    Figure1Row row;
    row.name = name;
    const std::vector<double> p = pol.probs(0);
    row.probs = {p[0], p[1], p[2]};
    row.j = value(pol, inst, inst.d0);
    return row;
  };

  report.ref_row = make_row("reference", inst.reference_policy);

  TrainerConfig tc;
  tc.beta = beta;
  tc.eta = 0.0;
  tc.learning_rate = 0.5;
  tc.steps = steps;
  tc.baseline = BaselineKind::Chosen;
  tc.baseline_smoothing = 0.0;
  tc.log_every = std::max(1, steps);
  report.dpo_row = make_row("preference-only", train(inst, data, tc, TrainMethod::Dpo).policy);

  for (double eta : eta_grid) {
    tc.eta = eta;
    report.rpo_rows.push_back(make_row("alignment eta=" + format_double(eta),
                                       train(inst, data, tc, TrainMethod::Rpo).policy));
  }

  // Grid certificate that the preference-only objective has a degenerate
  // near-minimal set.  The loss depends on the compared pair only through
  // p_a / p_b, so the scan is log-spaced in p_b and linear in the mass p_c
  // handed to the never-compared response.
  std::vector<double> pb_levels;
  for (double pb = 1e-4; pb < 0.5; pb *= std::pow(10.0, 0.05)) pb_levels.push_back(pb);
  std::vector<double> pc_levels = {0.0};
  for (double pc = 0.005; pc < 0.9995; pc += 0.005) pc_levels.push_back(pc);

  double min_loss = kInf;
  std::vector<std::array<double, 4>> scanned;  // pa, pb, pc, loss
  for (double pb : pb_levels) {
    for (double pc : pc_levels) {
      const double pa = 1.0 - pb - pc;
      if (pa <= 0.0) continue;
      const double loss = softplus(-beta * (std::log(pa) - std::log(pb)));
      min_loss = std::min(min_loss, loss);
      scanned.push_back({pa, pb, pc, loss});
    }
  }
  report.dpo_grid_min_loss = min_loss;
  const double threshold = min_loss + 1e-3;
  double best_high = -1.0, best_low = 2.0;
  for (const auto& point : scanned) {
    if (point[3] > threshold) continue;
    if (point[2] > best_high) {
      best_high = point[2];
      report.dpo_point_high_c = {point[0], point[1], point[2]};
      report.dpo_loss_high_c = point[3];
    }
    if (point[2] < best_low) {
      best_low = point[2];
      report.dpo_point_low_c = {point[0], point[1], point[2]};
      report.dpo_loss_low_c = point[3];
    }
  }
  return report;
}

std::string figure1_to_json(const Figure1Report& report) {
  nlohmann::json j;
  j["beta"] = report.beta;
  j["steps"] = report.steps;
  j["eta_grid"] = report.eta_grid;
  j["reference"] = row_json(report.ref_row);
  j["preference_only"] = row_json(report.dpo_row);
  j["alignment_regularized"] = nlohmann::json::array();
  for (const Figure1Row& row : report.rpo_rows) j["alignment_regularized"].push_back(row_json(row));
  j["grid_certificate"] = {
      {"min_loss", report.dpo_grid_min_loss},
      {"high_c_point", {report.dpo_point_high_c[0], report.dpo_point_high_c[1],
                        report.dpo_point_high_c[2]}},
      {"high_c_loss", report.dpo_loss_high_c},
      {"low_c_point", {report.dpo_point_low_c[0], report.dpo_point_low_c[1],
                       report.dpo_point_low_c[2]}},
      {"low_c_loss", report.dpo_loss_low_c},
  };
  return j.dump(2) + "\n";
}

void OveroptConfig::validate() const {
  if (seeds < 1) throw config_error("overopt: seeds must be at least 1");
  if (n < 1) throw config_error("overopt: n must be at least 1");
  if (num_prompts < 1) throw config_error("overopt: num_prompts must be at least 1");
  if (num_responses < 2) throw config_error("overopt: num_responses must be at least 2");
  if (feature_dim < 1 || feature_dim >= num_responses) {
    throw config_error("overopt: feature_dim must be in [1, num_responses)");
  }
  if (eta_grid.empty()) throw config_error("overopt: eta_grid must be nonempty");
  double prev = -1.0;
  for (double eta : eta_grid) {
    if (eta < 0.0) throw config_error("overopt: alignment weights must be nonnegative");
    if (eta <= prev) throw config_error("overopt: eta_grid must be strictly increasing");
    prev = eta;
  }
  if (headline_eta < 0.0) throw config_error("overopt: headline_eta must be nonnegative");
  trainer.validate();
}

OveroptReport overopt_study(const OveroptConfig& cfg) {
  cfg.validate();
  OveroptReport report;
  report.eta_grid = cfg.eta_grid;
  report.eta0_identical = true;
  bool has_zero_arm = false;

  const std::size_t cells =
      static_cast<std::size_t>(cfg.num_prompts) * static_cast<std::size_t>(cfg.num_responses);
  const SplitMix64 master(cfg.seed);

  for (int s = 0; s < cfg.seeds; ++s) {
    SplitMix64 rng = master.stream(static_cast<std::uint64_t>(s));

    // Random feature geometry with a uniform (zero-parameter) reference:
    // the trained policy inherits the feature parametrization, so with
    // feature_dim < num_responses it cannot place mass freely.
    std::vector<double> features(cells * static_cast<std::size_t>(cfg.feature_dim));
    for (double& f : features) f = 2.0 * rng.next_double() - 1.0;
    const TabularPolicy ref = TabularPolicy::from_features(
        cfg.num_prompts, cfg.num_responses, cfg.feature_dim, features,
        std::vector<double>(static_cast<std::size_t>(cfg.feature_dim), 0.0),
        std::vector<std::uint8_t>(cells, 1));

    Grid values(cfg.num_prompts, cfg.num_responses);
    for (double& v : values.v) v = 0.05 + 0.9 * rng.next_double();
    const BanditInstance inst = BanditInstance::make(
        RewardTable{values, 1.0}, ref, PromptDistribution::uniform(cfg.num_prompts));

    const PreferenceDataset data = generate_dataset(inst, cfg.n, rng);

    TrainerConfig tc = cfg.trainer;
    tc.seed = rng.next_u64();
    const TrainResult dpo = train(inst, data, tc, TrainMethod::Dpo);

    OveroptSeedResult seed_result;
    seed_result.dpo_final = dpo.trace.rows.back().mean_chosen_logprob;
    seed_result.dpo_trace = dpo.trace;

    for (double eta : cfg.eta_grid) {
      tc.eta = eta;
      const TrainResult arm = train(inst, data, tc, TrainMethod::Rpo);
      seed_result.final_by_eta.push_back(arm.trace.rows.back().mean_chosen_logprob);
      if (eta == 0.0) {
        has_zero_arm = true;
        if (!(arm.trace == dpo.trace) || !(arm.policy.logits == dpo.policy.logits)) {
          report.eta0_identical = false;
        }
      }
    }

    tc.eta = cfg.headline_eta;
    const TrainResult rpo = train(inst, data, tc, TrainMethod::Rpo);
    seed_result.rpo_final = rpo.trace.rows.back().mean_chosen_logprob;
    seed_result.rpo_trace = rpo.trace;

    report.per_seed.push_back(std::move(seed_result));
  }

  if (!has_zero_arm) report.eta0_identical = false;

  int wins = 0;
  for (const OveroptSeedResult& sr : report.per_seed) {
    if (sr.rpo_final >= sr.dpo_final) ++wins;
  }
  report.fraction_rpo_ge_dpo = static_cast<double>(wins) / static_cast<double>(cfg.seeds);

  for (std::size_t ei = 0; ei < cfg.eta_grid.size(); ++ei) {
    std::vector<double> finals;
    for (const OveroptSeedResult& sr : report.per_seed) finals.push_back(sr.final_by_eta[ei]);
    report.median_final_by_eta.push_back(median_sorted(finals));
  }
  return report;
}

std::string overopt_to_json(const OveroptReport& report) {
  nlohmann::json j;
  j["seeds"] = report.per_seed.size();
  j["fraction_rpo_ge_dpo"] = report.fraction_rpo_ge_dpo;
  j["eta_grid"] = report.eta_grid;
  j["median_final_by_eta"] = report.median_final_by_eta;
  j["eta0_identical"] = report.eta0_identical;
  j["per_seed"] = nlohmann::json::array();
  for (const OveroptSeedResult& sr : report.per_seed) {
    j["per_seed"].push_back({{"preference_only_final", sr.dpo_final},
                             {"regularized_final", sr.rpo_final},
                             {"final_by_eta", sr.final_by_eta}});
  }
  return j.dump(2) + "\n";
}

ConcentrationReport concentration_check(const BanditInstance& inst,
                                        const std::vector<RewardTable>& candidates, int n,
                                        double delta, int trials, std::uint64_t seed) {
  inst.validate();
  if (candidates.empty()) throw config_error("concentration: candidate set must be nonempty");
  if (n < 1) throw config_error("concentration: n must be at least 1");
  if (trials < 1) throw config_error("concentration: trials must be at least 1");

  const TheoryHyperparams th = theory_hyperparams(n, delta, inst.true_reward.bound,
                                                  inst.num_prompts, inst.num_responses);
  const double slack = (3.0 / static_cast<double>(n)) * (th.log_cover + std::log(1.0 / delta));

  // Exact pairwise squared-Hellinger separation under the collection law,
  // fixed per candidate across trials.
  const std::vector<PairWeight> mu = positive_pairs(inst);
  std::vector<double> rhs(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (candidates[c].values.rows != inst.num_prompts ||
        candidates[c].values.cols != inst.num_responses) {
      throw config_error("concentration: candidate table shape does not match the instance");
    }
    double hell = 0.0;
    for (const PairWeight& p : mu) {
      hell += p.mu * hellinger_sq_bt(inst.true_reward, candidates[c], p.x, p.a1, p.a0);
    }
    rhs[c] = -2.0 * hell + slack;
  }

  ConcentrationReport report;
  report.slack = slack;
  const SplitMix64 master(seed);
  int passes = 0;
  double margin_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    SplitMix64 rng = master.stream(static_cast<std::uint64_t>(t));
    const PreferenceDataset data = generate_dataset(inst, n, rng);
    const AggregatedData agg = AggregatedData::from(data);
    const double loss_true = mle_loss(inst.true_reward, agg);
    double margin = kInf;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double lhs = loss_true - mle_loss(candidates[c], agg);
      margin = std::min(margin, rhs[c] - lhs);
    }
    if (margin >= 0.0) ++passes;
    margin_sum += margin;
  }
  report.pass_fraction = static_cast<double>(passes) / static_cast<double>(trials);
  report.mean_margin = margin_sum / static_cast<double>(trials);
  return report;
}

std::string concentration_to_json(const ConcentrationReport& report) {
  nlohmann::json j;
  j["pass_fraction"] = report.pass_fraction;
  j["mean_margin"] = report.mean_margin;
  j["slack"] = report.slack;
  return j.dump(2) + "\n";
}

BanditInstance wellcovered_instance() {
  const int k = 4, m = 6;
  // Top margins spread geometrically so the prompts become statistically
  // identifiable at staggered sample sizes; their mixture decays smoothly
  // across the whole sweep window instead of saturating and then collapsing.
  const double margins[4] = {0.1, 0.2, 0.4, 0.8};
  Grid values(k, m);
  for (int x = 0; x < k; ++x) {
    values.at(x, 0) = 0.95;
    const double second = 0.95 - margins[x];
    for (int a = 1; a < m; ++a) {
      values.at(x, a) = second - (second - 0.01) * (a - 1) / 4.0;
    }
  }
  return BanditInstance::make(RewardTable{values, 1.0}, TabularPolicy::uniform(k, m),
                              PromptDistribution::uniform(k));
}

}  // namespace rpolab
