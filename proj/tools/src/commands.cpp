#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rpolab/adversarial.hpp"
#include "rpolab/analysis.hpp"
#include "rpolab/direct_opt.hpp"
#include "rpolab/errors.hpp"
#include "rpolab/math.hpp"
#include "rpolab/preference.hpp"
#include "rpolab/rng.hpp"
#include "rpolab/serialize.hpp"
#include "sha256.hpp"

namespace rpolab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path);
  out << bytes;
  if (!out) throw io_error("write failed: " + path);
}

// Non-finite numbers have no JSON literal; represent them as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(); }

// Deterministic by default: the manifest timestamp honors the
// SOURCE_DATE_EPOCH convention (seconds since the epoch from the
// environment) and is 0 when the variable is absent, so repeated runs
// produce identical bytes unless the caller opts into real time.
std::uint64_t manifest_timestamp() {
  const char* env = std::getenv("SOURCE_DATE_EPOCH");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') return 0;
  return static_cast<std::uint64_t>(v);
}

struct Artifact {
  std::string file;
  std::size_t bytes = 0;
  std::string sha256;
};

class Bundle {
 public:
  explicit Bundle(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw io_error("cannot create output directory " + dir_ + ": " + ec.message());
  }

  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void add_bytes(const std::string& name, const std::string& bytes) {
    write_file(path(name), bytes);
    artifacts_.push_back({name, bytes.size(), sha256_hex(bytes)});
  }

  // Register a file one of the library writers already produced in the
  // bundle directory.
  void record(const std::string& name) {
    const std::string bytes = read_file(path(name));
    artifacts_.push_back({name, bytes.size(), sha256_hex(bytes)});
  }

  // Write the canonical config and the manifest that references every
  // artifact in the directory.
  void finish(const RunConfig& cfg) {
    const std::string config_bytes = serialize_config(cfg);
    add_bytes("config.json", config_bytes);
    std::sort(artifacts_.begin(), artifacts_.end(),
              [](const Artifact& a, const Artifact& b) { return a.file < b.file; });
    json m;
    m["schema"] = "bundle-v1";
    m["command"] = to_string(cfg.command);
    m["seed"] = cfg.seed;
    m["tool_version"] = kToolVersion;
    m["config_sha256"] = sha256_hex(config_bytes);
    m["generated_at"] = manifest_timestamp();
    json arts = json::array();
    for (const Artifact& a : artifacts_) {
      json e;
      e["file"] = a.file;
      e["bytes"] = a.bytes;
      e["sha256"] = a.sha256;
      arts.push_back(e);
    }
    m["artifacts"] = arts;
    write_file(path("manifest.json"), m.dump(2) + "\n");
  }

 private:
  std::string dir_;
  std::vector<Artifact> artifacts_;
};

// Datasets come from a file or are drawn fresh from the instance; the
// master seed's substream keeps generation independent of later draws.
PreferenceDataset load_or_generate(const BanditInstance& inst, const std::string& file, long n,
                                   SplitMix64 rng, std::uint64_t seed) {
  if (!file.empty()) return read_dataset_jsonl(file);
  PreferenceDataset data = generate_dataset(inst, static_cast<int>(n), rng);
  data.seed = seed;
  return data;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

void cmd_gen(const RunConfig& cfg, Bundle& b, std::ostream& out) {
  const BanditInstance inst = cfg.instance.resolve();
  SplitMix64 rng = SplitMix64(cfg.seed).stream(0);
  PreferenceDataset data = generate_dataset(inst, static_cast<int>(cfg.gen.n), rng);
  data.seed = cfg.seed;
  write_instance_json(inst, b.path("instance.json"));
  b.record("instance.json");
  write_dataset_jsonl(data, b.path("dataset.jsonl"));
  b.record("dataset.jsonl");
  out << "wrote " << data.size() << " comparisons to dataset.jsonl\n";
}

std::string trace_to_json(const TrainTrace& trace) {
  json j;
  j["schema"] = "trace-v1";
  json rows = json::array();
  for (const TraceRow& r : trace.rows) {
    json e;
    e["step"] = r.step;
    e["rpo_loss"] = num(r.rpo_loss);
    e["dpo_term"] = num(r.dpo_term);
    e["sft_term"] = num(r.sft_term);
    e["mean_chosen_logprob"] = num(r.mean_chosen_logprob);
    e["mean_kl_to_ref"] = num(r.mean_kl_to_ref);
    e["j_pi"] = num(r.j_pi);
    e["gap_vs_optimal"] = num(r.gap_vs_optimal);
    rows.push_back(e);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

void cmd_train(const RunConfig& cfg, Bundle& b, std::ostream& out) {
  const BanditInstance inst = cfg.instance.resolve();
  const SplitMix64 master(cfg.seed);
  const PreferenceDataset data =
      load_or_generate(inst, cfg.train.data, cfg.train.n, master.stream(0), cfg.seed);
  TrainerConfig tc = cfg.trainer;
  tc.seed = master.stream(1).next_u64();
  const TrainMethod method = cfg.train.method == "dpo" ? TrainMethod::Dpo : TrainMethod::Rpo;
  const TrainResult res = train(inst, data, tc, method);
  write_policy_json(res.policy, b.path("policy.json"));
  b.record("policy.json");
  write_trace_csv(res.trace, b.path("trace.csv"));
  b.record("trace.csv");
  if (cfg.format == "json") b.add_bytes("trace.json", trace_to_json(res.trace));
  const TraceRow& last = res.trace.rows.back();
  out << cfg.train.method << " on " << data.size() << " comparisons: final loss "
      << format_double(last.rpo_loss) << ", expected true reward " << format_double(last.j_pi)
      << ", shortfall vs best " << format_double(last.gap_vs_optimal) << "\n";
}

void cmd_solve(const RunConfig& cfg, Bundle& b, std::ostream& out) {
  const BanditInstance inst = cfg.instance.resolve();
  const SplitMix64 master(cfg.seed);
  const PreferenceDataset data =
      load_or_generate(inst, cfg.solve.data, cfg.solve.n, master.stream(0), cfg.seed);
  const TabularPolicy base = chosen_policy(data, inst, cfg.solve.baseline_smoothing);
  double beta = cfg.solve.beta;
  double eta = cfg.solve.eta;
  if (cfg.solve.hyper == "theory") {
    const TheoryHyperparams th =
        theory_hyperparams(data.size(), cfg.solve.delta, cfg.reward_class.bound, inst.num_prompts,
                           inst.num_responses);
    beta = th.beta;
    eta = th.eta;
  }
  SolveReport rep;
  if (cfg.solve.method == "maximin")
    rep = solve_maximin(inst, base, data, cfg.reward_class, beta, eta, cfg.solver);
  else if (cfg.solve.method == "minimax")
    rep = solve_minimax(inst, base, data, cfg.reward_class, beta, eta, cfg.solver);
  else
    rep = duality_gap(inst, base, data, cfg.reward_class, beta, eta, cfg.solver);
  write_report_json(rep, b.path("report.json"));
  b.record("report.json");
  write_policy_json(rep.recovered_policy, b.path("policy.json"));
  b.record("policy.json");
  const std::string text = report_to_json(rep);
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

std::string sweep_summary_json(const SweepResult& res, const SweepConfig& sc) {
  json j;
  j["schema"] = "sweep-v1";
  j["method"] = to_string(res.method);
  j["hyper"] = to_string(sc.hyper_mode);
  j["seeds_per_n"] = sc.seeds_per_n;
  j["n_values"] = res.n_values;
  json med = json::array(), q25 = json::array(), q75 = json::array();
  for (double v : res.medians) med.push_back(num(v));
  for (double v : res.q25) q25.push_back(num(v));
  for (double v : res.q75) q75.push_back(num(v));
  j["medians"] = med;
  j["q25"] = q25;
  j["q75"] = q75;
  j["slope"] = num(res.slope);
  j["intercept"] = num(res.intercept);
  j["slope_stderr"] = num(res.slope_stderr);
  j["slope_ci_half"] = num(res.slope_ci_half);
  j["failures"] = res.failures;
  j["comparator_kl"] = num(res.comparator_kl);
  return j.dump(2) + "\n";
}

std::string sweep_cells_json(const SweepResult& res) {
  json j;
  j["schema"] = "sweep-cells-v1";
  json cells = json::array();
  for (const SweepCell& c : res.cells) {
    json e;
    e["n"] = c.n;
    e["seed"] = c.seed;
    e["gap"] = num(c.gap);
    e["eta"] = num(c.eta);
    e["beta"] = num(c.beta);
    e["status"] = c.status;
    cells.push_back(e);
  }
  j["cells"] = cells;
  return j.dump(2) + "\n";
}

SweepConfig build_sweep_config(const RunConfig& cfg) {
  SweepConfig sc;
  sc.n_grid.clear();
  for (long n : cfg.sweep.n_grid) sc.n_grid.push_back(static_cast<int>(n));
  sc.seeds_per_n = cfg.sweep.seeds_per_n;
  sc.instance = cfg.instance.resolve();
  sc.method = sweep_method_from_string(cfg.sweep.method);
  sc.hyper_mode = hyper_mode_from_string(cfg.sweep.hyper);
  sc.fixed_eta = cfg.sweep.eta;
  sc.fixed_beta = cfg.sweep.beta;
  sc.delta = cfg.sweep.delta;
  sc.reward_class = cfg.reward_class;
  sc.solver = cfg.solver;
  sc.trainer = cfg.trainer;
  sc.baseline_smoothing = cfg.sweep.baseline_smoothing;
  sc.seed = cfg.seed;
  return sc;
}

void cmd_sweep(const RunConfig& cfg, Bundle& b, std::ostream& out) {
  const SweepConfig sc = build_sweep_config(cfg);
  const SweepResult res = gap_sweep(sc);
  write_sweep_csv(res, b.path("cells.csv"));
  b.record("cells.csv");
  write_sweep_gnuplot(res, "cells.csv", b.path("plot.gp"));
  b.record("plot.gp");
  b.add_bytes("summary.json", sweep_summary_json(res, sc));
  if (cfg.format == "json") b.add_bytes("cells.json", sweep_cells_json(res));
  out << "sweep over " << res.cells.size() << " cells (" << res.failures << " failed): ";
  if (std::isfinite(res.slope))
    out << "log-log slope " << format_double(res.slope) << " +- "
        << format_double(res.slope_ci_half) << "\n";
  else
    out << "no slope (need 3+ sample sizes with finite medians)\n";
}

void cmd_figure1(const RunConfig& cfg, Bundle& b, std::ostream& out) {
  const Figure1Report rep = figure1_study(cfg.figure1.eta_grid, cfg.figure1.beta,
                                          cfg.figure1.steps);
  b.add_bytes("report.json", figure1_to_json(rep));
  const auto print_row = [&](const Figure1Row& row) {
    out << "  " << row.name << ": (" << format_double(row.probs[0]) << ", "
        << format_double(row.probs[1]) << ", " << format_double(row.probs[2])
        << ")  J = " << format_double(row.j) << "\n";
  };
  out << "three-response showcase (beta " << format_double(rep.beta) << ", " << rep.steps
      << " steps):\n";
  print_row(rep.ref_row);
  print_row(rep.dpo_row);
  for (const Figure1Row& row : rep.rpo_rows) print_row(row);
  out << "  preference-only near-minimal grid points: ("
      << format_double(rep.dpo_point_high_c[0]) << ", " << format_double(rep.dpo_point_high_c[1])
      << ", " << format_double(rep.dpo_point_high_c[2]) << ") and ("
      << format_double(rep.dpo_point_low_c[0]) << ", " << format_double(rep.dpo_point_low_c[1])
      << ", " << format_double(rep.dpo_point_low_c[2]) << ") within "
      << format_double(std::fabs(rep.dpo_loss_high_c - rep.dpo_loss_low_c))
      << " of each other\n";
}

// ---------------------------------------------------------------------------
// Check suites: fast invariant scans across every module.
// ---------------------------------------------------------------------------

struct SuiteResult {
  std::string name;
  bool passed = false;
  int cases = 0;
  double max_error = 0.0;
  std::string detail;
};

BanditInstance random_check_instance(SplitMix64& rng, int k, int m) {
  Grid rewards(k, m);
  for (double& v : rewards.v) v = 0.05 + 0.9 * rng.next_double();
  Grid ref(k, m);
  for (int x = 0; x < k; ++x) {
    double total = 0.0;
    for (int a = 0; a < m; ++a) {
      ref.at(x, a) = 0.1 + rng.next_double();
      total += ref.at(x, a);
    }
    for (int a = 0; a < m; ++a) ref.at(x, a) /= total;
  }
  return BanditInstance::make(RewardTable{std::move(rewards), 1.0}, TabularPolicy::from_probs(ref),
                              PromptDistribution::uniform(k));
}

std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> at, double h) {
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

double disagreement(const std::vector<double>& got, const std::vector<double>& want) {
  double scale = 1.0;
  for (double w : want) scale = std::max(scale, std::fabs(w));
  double diff = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i)
    diff = std::max(diff, std::fabs(got[i] - want[i]));
  return diff / scale;
}

SuiteResult suite_gradients(std::uint64_t seed) {
  SuiteResult res{"gradients"};
  SplitMix64 rng = SplitMix64(seed).stream(101);
  const double h = 1e-5;
  const double tol = 1e-5;
  for (int trial = 0; trial < 25; ++trial) {
    const int k = 1 + rng.next_below(3);
    const int m = 2 + rng.next_below(3);
    const BanditInstance inst = random_check_instance(rng, k, m);
    SplitMix64 data_rng = rng.stream(7 + static_cast<std::uint64_t>(trial));
    const PreferenceDataset data = generate_dataset(inst, 40, data_rng);
    const double beta = 0.3 + rng.next_double();
    const double eta = 0.5 * rng.next_double();
    const TabularPolicy& ref = inst.reference_policy;
    const std::size_t cells = static_cast<std::size_t>(k) * m;

    Grid logits(k, m);
    for (double& v : logits.v) v = 2.0 * rng.next_double() - 1.0;
    const TabularPolicy pol =
        TabularPolicy::from_logits(logits, std::vector<std::uint8_t>(cells, 1));
    const auto rebuild = [&](const std::vector<double>& v) {
      Grid g(k, m);
      g.v = v;
      return TabularPolicy::from_logits(std::move(g), std::vector<std::uint8_t>(cells, 1));
    };

    res.max_error = std::max(
        res.max_error,
        disagreement(dpo_gradient(pol, ref, data, beta),
                     central_difference(
                         [&](const std::vector<double>& v) {
                           return dpo_loss(rebuild(v), ref, data, beta);
                         },
                         logits.v, h)));
    ++res.cases;

    res.max_error = std::max(
        res.max_error,
        disagreement(rpo_gradient(pol, ref, ref, data, inst.d0, beta, eta),
                     central_difference(
                         [&](const std::vector<double>& v) {
                           return rpo_loss(rebuild(v), ref, ref, data, inst.d0, beta, eta).total;
                         },
                         logits.v, h)));
    ++res.cases;

    Grid reward(k, m);
    for (double& v : reward.v) v = 0.1 + 0.8 * rng.next_double();
    const RewardTable table{reward, 1.0};
    const auto reward_of = [&](const std::vector<double>& v) {
      Grid g(k, m);
      g.v = v;
      return RewardTable{std::move(g), 1.0};
    };

    res.max_error = std::max(
        res.max_error,
        disagreement(mle_gradient(table, data).v,
                     central_difference(
                         [&](const std::vector<double>& v) { return mle_loss(reward_of(v), data); },
                         reward.v, h)));
    ++res.cases;

    res.max_error = std::max(
        res.max_error,
        disagreement(minimax_gradient(table, inst, ref, data, beta, eta).v,
                     central_difference(
                         [&](const std::vector<double>& v) {
                           return minimax_objective(reward_of(v), inst, ref, data, beta, eta);
                         },
                         reward.v, h)));
    ++res.cases;
  }
  res.passed = res.max_error <= tol;
  return res;
}

SuiteResult suite_duality(std::uint64_t seed) {
  SuiteResult res{"duality"};
  res.passed = true;
  SplitMix64 rng = SplitMix64(seed).stream(202);
  for (int trial = 0; trial < 4; ++trial) {
    const int k = 1 + rng.next_below(2);
    const int m = 2 + rng.next_below(2);
    const BanditInstance inst = random_check_instance(rng, k, m);
    SplitMix64 data_rng = rng.stream(50 + static_cast<std::uint64_t>(trial));
    const PreferenceDataset data = generate_dataset(inst, 30, data_rng);
    try {
      const SolveReport rep = duality_gap(inst, inst.reference_policy, data, RewardClassSpec{},
                                          0.3, 0.1, SolverOptions{});
      res.max_error = std::max(res.max_error, std::fabs(rep.duality_gap));
      res.passed = res.passed && rep.certified;
    } catch (const std::exception& e) {
      res.passed = false;
      res.detail = e.what();
    }
    ++res.cases;
  }
  return res;
}

double kl_regularized_objective(const TabularPolicy& pol, const RewardTable& r,
                                const TabularPolicy& ref, const PromptDistribution& d0,
                                double beta) {
  double total = 0.0;
  for (int x = 0; x < r.num_prompts(); ++x) {
    const std::vector<double> probs = pol.probs(x);
    double expected = 0.0;
    for (int a = 0; a < r.num_responses(); ++a) expected += probs[a] * r.at(x, a);
    total += d0.at(x) * (expected - beta * kl_to_ref(pol, ref, x));
  }
  return total;
}

SuiteResult suite_closed_form(std::uint64_t seed) {
  SuiteResult res{"closed_form"};
  res.passed = true;
  SplitMix64 rng = SplitMix64(seed).stream(303);
  const double value_tol = 1e-10;
  for (int draw = 0; draw < 20; ++draw) {
    const int k = 1 + rng.next_below(3);
    const int m = 2 + rng.next_below(3);
    const BanditInstance inst = random_check_instance(rng, k, m);
    const TabularPolicy& ref = inst.reference_policy;
    const RewardTable& r = inst.true_reward;
    const double beta = 0.2 + rng.next_double();
    const PromptDistribution d0 = PromptDistribution::uniform(k);

    const KlOptimalPolicy best = optimal_kl_policy(r, ref, beta);
    const double achieved = kl_regularized_objective(best.policy, r, ref, d0, beta);
    double predicted = 0.0;
    for (int x = 0; x < k; ++x) predicted += d0.at(x) * beta * best.log_partition[x];
    res.max_error = std::max(res.max_error, std::fabs(achieved - predicted));
    res.passed = res.passed && std::fabs(achieved - predicted) <= value_tol;
    ++res.cases;

    for (int p = 0; p < 10; ++p) {
      Grid logits(k, m);
      for (double& v : logits.v) v = 4.0 * rng.next_double() - 2.0;
      const TabularPolicy rival = TabularPolicy::from_logits(
          std::move(logits), std::vector<std::uint8_t>(static_cast<std::size_t>(k) * m, 1));
      const double rival_value = kl_regularized_objective(rival, r, ref, d0, beta);
      res.passed = res.passed && rival_value <= achieved + 1e-12;
      ++res.cases;
    }
  }
  return res;
}

SuiteResult suite_sigmoid(std::uint64_t seed) {
  SuiteResult res{"sigmoid"};
  res.passed = true;
  SplitMix64 rng = SplitMix64(seed).stream(404);
  // Mean-value bounds on the logistic curve; the epsilon absorbs the last
  // bit of rounding in the subtraction.
  const double fp_slack = 1e-15;
  for (double bound : {0.5, 1.0, 2.0}) {
    const double kappa = sigmoid_kappa(bound);
    for (int trial = 0; trial < 6000; ++trial) {
      const double z1 = bound * (2.0 * rng.next_double() - 1.0);
      const double z2 = bound * (2.0 * rng.next_double() - 1.0);
      const double ds = std::fabs(sigmoid(z1) - sigmoid(z2));
      const double dz = std::fabs(z1 - z2);
      const double violation = std::max(kappa * dz - ds, ds - dz);
      res.max_error = std::max(res.max_error, violation);
      res.passed = res.passed && violation <= fp_slack;
      ++res.cases;
    }
  }
  return res;
}

std::string check_report_json(const std::vector<SuiteResult>& suites, bool all_passed) {
  json j;
  j["schema"] = "check-v1";
  json arr = json::array();
  for (const SuiteResult& s : suites) {
    json e;
    e["name"] = s.name;
    e["passed"] = s.passed;
    e["cases"] = s.cases;
    e["max_error"] = num(s.max_error);
    if (!s.detail.empty()) e["detail"] = s.detail;
    arr.push_back(e);
  }
  j["suites"] = arr;
  j["all_passed"] = all_passed;
  return j.dump(2) + "\n";
}

// Returns the failure message ("" when everything passed) so the caller
// can finish the bundle before raising.
std::string cmd_check(const RunConfig& cfg, Bundle& b, std::ostream& out) {
  std::vector<SuiteResult> suites;
  for (const std::string& name : cfg.check.suites) {
    if (name == "gradients")
      suites.push_back(suite_gradients(cfg.seed));
    else if (name == "duality")
      suites.push_back(suite_duality(cfg.seed));
    else if (name == "closed_form")
      suites.push_back(suite_closed_form(cfg.seed));
    else
      suites.push_back(suite_sigmoid(cfg.seed));
  }
  bool all_passed = true;
  std::string failed;
  for (const SuiteResult& s : suites) {
    all_passed = all_passed && s.passed;
    if (!s.passed) failed += (failed.empty() ? "" : ", ") + s.name;
    out << s.name << ": " << (s.passed ? "pass" : "FAIL") << " (" << s.cases
        << " cases, max error " << format_double(s.max_error) << ")"
        << (s.detail.empty() ? "" : " - " + s.detail) << "\n";
  }
  b.add_bytes("report.json", check_report_json(suites, all_passed));
  return all_passed ? "" : "check suite failure: " + failed;
}

}  // namespace

void run_command(const RunConfig& cfg, std::ostream& out) {
  Bundle b(cfg.out_dir);
  std::string check_failure;
  switch (cfg.command) {
    case Command::Gen: cmd_gen(cfg, b, out); break;
    case Command::Train: cmd_train(cfg, b, out); break;
    case Command::Solve: cmd_solve(cfg, b, out); break;
    case Command::Sweep: cmd_sweep(cfg, b, out); break;
    case Command::Figure1: cmd_figure1(cfg, b, out); break;
    case Command::Check: check_failure = cmd_check(cfg, b, out); break;
  }
  b.finish(cfg);
  if (!check_failure.empty()) throw certification_error(check_failure);
}

namespace {

void emit_error(std::ostream& err, const std::string& type, const std::string& message) {
  json e;
  e["error"]["type"] = type;
  e["error"]["message"] = message;
  err << e.dump() << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::string command_arg, config_path, out_dir, format;
  std::uint64_t seed = 0;

  CLI::App app{"Offline preference-optimization laboratory for finite contextual bandits"};
  app.name("rpolab");
  app.add_option("command", command_arg,
                 "Command to run: gen, train, solve, sweep, figure1, or check")
      ->check(CLI::IsMember({"gen", "train", "solve", "sweep", "figure1", "check"}));
  app.add_option("--config", config_path, "Config file (TOML subset or JSON)");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Master seed (unsigned 64-bit)");
  app.add_option("--out", out_dir, "Output directory for the artifact bundle");
  app.add_option("--format", format, "Tabular artifact format")
      ->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "config_error", e.what());
    return 2;
  }

  try {
    Overrides ov;
    ov.command = command_arg;
    ov.seed_given = seed_opt->count() > 0;
    ov.seed = seed;
    ov.out_dir = out_dir;
    ov.format = format;
    const RunConfig cfg = config_path.empty() ? parse_config("", "<flags>", ov)
                                              : parse_config_file(config_path, ov);
    run_command(cfg, out);
    return 0;
  } catch (const config_error& e) {
    emit_error(err, "config_error", e.what());
    return 2;
  } catch (const certification_error& e) {
    emit_error(err, "certification_error", e.what());
    return 3;
  } catch (const solver_error& e) {
    emit_error(err, "solver_error", e.what());
    return 3;
  } catch (const io_error& e) {
    emit_error(err, "io_error", e.what());
    return 4;
  } catch (const std::exception& e) {
    emit_error(err, "internal_error", e.what());
    return 1;
  }
}

}  // namespace rpolab::cli
