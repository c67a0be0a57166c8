#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpolab/adversarial.hpp"
#include "rpolab/direct_opt.hpp"
#include "rpolab/instance.hpp"

namespace rpolab::cli {

enum class Command { Gen, Train, Solve, Sweep, Figure1, Check };

std::string to_string(Command c);
Command command_from_string(const std::string& s);

// Which environment a command runs in: a named builtin ("figure1" or
// "wellcovered"), a file in the instance exchange format, or an inline
// table.  Exactly one of the three forms must be given.
struct InstanceSpec {
  std::string name;
  std::string file;
  // Inline form: reference probabilities and true rewards row-major, with
  // an optional prompt distribution (empty = uniform).  Behavior draws
  // response pairs i.i.d. from the reference policy.
  int num_prompts = 0;
  int num_responses = 0;
  double reward_bound = 1.0;
  std::vector<double> rewards;
  std::vector<double> ref_probs;
  std::vector<double> d0;

  bool inline_given() const;
  bool present() const;
  // Throws config_error when zero or several forms are given, the named
  // builtin is unknown, or the inline table is inconsistent; io_error when
  // the file form cannot be read.
  BanditInstance resolve() const;
};

struct GenSpec {
  long n = 0;  // comparisons to draw; required >= 1
};

struct TrainSpec {
  std::string method = "rpo";  // "dpo" | "rpo"
  std::string data;            // dataset path; empty = generate `n` fresh
  long n = 0;
};

struct SolveSpec {
  std::string method = "duality";  // "maximin" | "minimax" | "duality"
  std::string data;                // dataset path; empty = generate `n` fresh
  long n = 0;
  std::string hyper = "fixed";     // "fixed" | "theory"
  double beta = 0.1;               // used when hyper == "fixed"
  double eta = 0.005;
  double delta = 0.1;              // used when hyper == "theory"
  double baseline_smoothing = 0.5;
};

struct SweepSpec {
  std::vector<long> n_grid;
  int seeds_per_n = 20;
  std::string method = "minimax";  // "maximin"|"minimax"|"rpo"|"dpo"
  std::string hyper = "theory";    // "theory" | "fixed"
  double delta = 0.1;
  double eta = 0.005;
  double beta = 0.1;
  double baseline_smoothing = 0.5;
};

struct Figure1Spec {
  std::vector<double> eta_grid = {0.005};
  double beta = 1.0;
  int steps = 2000;
};

struct CheckSpec {
  std::vector<std::string> suites = {"gradients", "duality", "closed_form", "sigmoid"};
};

struct RunConfig {
  Command command = Command::Check;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = "out";
  std::string format = "csv";  // "csv" | "json"

  InstanceSpec instance;
  GenSpec gen;
  TrainSpec train;
  TrainerConfig trainer;
  SolveSpec solve;
  SolverOptions solver;
  RewardClassSpec reward_class;
  SweepSpec sweep;
  Figure1Spec figure1;
  CheckSpec check;

  // Semantic validation after parsing: mandatory seed, enum strings,
  // command-specific required fields, nonnegative weights.
  void validate() const;
};

// Command-line flag values applied on top of the file config.
struct Overrides {
  std::string command;  // empty = derive from the config's command block
  bool seed_given = false;
  std::uint64_t seed = 0;
  std::string out_dir;  // empty = keep the config's value
  std::string format;   // empty = keep the config's value
};

// Parse a config text and apply overrides.  The text is JSON when its
// first non-space byte is '{'; otherwise it is read as a TOML subset
// (comments, [table] headers, dotted keys, strings, booleans, integers,
// floats, and arrays that may span lines).  `origin` names the source in
// error messages.  Unknown keys and tables that the selected command does
// not consume are rejected, naming the key and its location.
RunConfig parse_config(const std::string& text, const std::string& origin,
                       const Overrides& overrides = {});
RunConfig parse_config_file(const std::string& path, const Overrides& overrides = {});

// Canonical JSON form: two-space indented, keys sorted, every consumed
// default materialized, only the active command's blocks present.
// Parsing the result again reproduces the same bytes.  The output
// describes the experiment, not its placement: out_dir is omitted, so
// runs of one config into different directories hash identically.
std::string serialize_config(const RunConfig& cfg);

// TOML-subset front end, exposed for tests.  Returns the object tree and,
// when `key_lines` is given, the 1-based line of each leaf key under its
// dotted path.
nlohmann::json parse_toml(const std::string& text, const std::string& origin,
                          std::map<std::string, int>* key_lines = nullptr);

}  // namespace rpolab::cli
