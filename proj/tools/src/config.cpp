#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rpolab/analysis.hpp"
#include "rpolab/errors.hpp"
#include "rpolab/serialize.hpp"

namespace rpolab::cli {

using nlohmann::json;

std::string to_string(Command c) {
  switch (c) {
    case Command::Gen: return "gen";
    case Command::Train: return "train";
    case Command::Solve: return "solve";
    case Command::Sweep: return "sweep";
    case Command::Figure1: return "figure1";
    case Command::Check: return "check";
  }
  throw config_error("unknown command enum value");
}

Command command_from_string(const std::string& s) {
  if (s == "gen") return Command::Gen;
  if (s == "train") return Command::Train;
  if (s == "solve") return Command::Solve;
  if (s == "sweep") return Command::Sweep;
  if (s == "figure1") return Command::Figure1;
  if (s == "check") return Command::Check;
  throw config_error("unknown command \"" + s +
                     "\"; expected one of gen, train, solve, sweep, figure1, check");
}

// ---------------------------------------------------------------------------
// TOML-subset parser
// ---------------------------------------------------------------------------

namespace {

struct TomlParser {
  const std::string& text;
  const std::string& origin;
  std::map<std::string, int>* lines;
  std::size_t pos = 0;
  int line = 1;
  json root = json::object();

  [[noreturn]] void fail(const std::string& msg) const {
    throw config_error(origin + ":" + std::to_string(line) + ": " + msg);
  }

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }

  char take() {
    const char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }

  void skip_spaces() {
    while (!done() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos;
  }

  void skip_comment() {
    if (!done() && peek() == '#')
      while (!done() && peek() != '\n') ++pos;
  }

  // Whitespace, comments, and newlines — used inside arrays, where values
  // may continue on later lines.
  void skip_filler() {
    for (;;) {
      skip_spaces();
      skip_comment();
      if (!done() && peek() == '\n') {
        take();
        continue;
      }
      return;
    }
  }

  void expect_end_of_line(const char* after) {
    skip_spaces();
    skip_comment();
    if (done()) return;
    if (peek() != '\n') fail(std::string("unexpected text after ") + after);
    take();
  }

  static bool bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string parse_basic_string() {
    // Opening quote already peeked.
    take();
    std::string out;
    for (;;) {
      if (done() || peek() == '\n') fail("unterminated string");
      char c = take();
      if (c == '"') return out;
      if (c == '\\') {
        if (done()) fail("unterminated escape");
        const char e = take();
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          default: fail(std::string("unsupported string escape \\") + e);
        }
      } else {
        out += c;
      }
    }
  }

  std::string parse_literal_string() {
    take();  // opening '
    std::string out;
    for (;;) {
      if (done() || peek() == '\n') fail("unterminated string");
      const char c = take();
      if (c == '\'') return out;
      out += c;
    }
  }

  std::string parse_key_part() {
    if (!done() && peek() == '"') return parse_basic_string();
    if (!done() && peek() == '\'') return parse_literal_string();
    std::string out;
    while (!done() && bare_key_char(peek())) out += take();
    if (out.empty()) fail("expected a key");
    return out;
  }

  std::vector<std::string> parse_dotted_key() {
    std::vector<std::string> parts;
    parts.push_back(parse_key_part());
    skip_spaces();
    while (!done() && peek() == '.') {
      take();
      skip_spaces();
      parts.push_back(parse_key_part());
      skip_spaces();
    }
    return parts;
  }

  json parse_number_or_bool() {
    std::string token;
    while (!done()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ',' || c == ']' || c == '#')
        break;
      token += take();
    }
    if (token.empty()) fail("expected a value");
    if (token == "true") return json(true);
    if (token == "false") return json(false);
    const bool integral = token.find_first_not_of("0123456789+-") == std::string::npos &&
                          token.find_first_of("0123456789") != std::string::npos &&
                          token.find_first_of("+-", 1) == std::string::npos;
    if (integral) {
      errno = 0;
      if (token[0] == '-') {
        char* end = nullptr;
        const long long v = std::strtoll(token.c_str(), &end, 10);
        if (errno == ERANGE || end != token.c_str() + token.size())
          fail("integer out of range: " + token);
        return json(static_cast<std::int64_t>(v));
      }
      char* end = nullptr;
      const unsigned long long v = std::strtoull(token.c_str(), &end, 10);
      if (errno == ERANGE || end != token.c_str() + token.size())
        fail("integer out of range: " + token);
      return json(static_cast<std::uint64_t>(v));
    }
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || errno == ERANGE || !std::isfinite(v))
      fail("cannot parse value \"" + token + "\"");
    return json(v);
  }

  json parse_value() {
    skip_spaces();
    if (done() || peek() == '\n') fail("expected a value");
    const char c = peek();
    if (c == '"') return json(parse_basic_string());
    if (c == '\'') return json(parse_literal_string());
    if (c == '[') {
      take();
      json arr = json::array();
      skip_filler();
      if (!done() && peek() == ']') {
        take();
        return arr;
      }
      for (;;) {
        skip_filler();
        arr.push_back(parse_value());
        skip_filler();
        if (done()) fail("unterminated array");
        if (peek() == ',') {
          take();
          skip_filler();
          if (!done() && peek() == ']') {
            take();
            return arr;
          }
          continue;
        }
        if (peek() == ']') {
          take();
          return arr;
        }
        fail("expected ',' or ']' in array");
      }
    }
    return parse_number_or_bool();
  }

  static std::string joined(const std::vector<std::string>& parts) {
    std::string out;
    for (const std::string& p : parts) {
      if (!out.empty()) out += '.';
      out += p;
    }
    return out;
  }

  // Navigate (creating tables as needed) to the table at `parts`.
  json* descend(const std::vector<std::string>& parts) {
    json* node = &root;
    for (const std::string& p : parts) {
      json& child = (*node)[p];
      if (child.is_null()) child = json::object();
      if (!child.is_object()) fail("key \"" + joined(parts) + "\" conflicts with a value");
      node = &child;
    }
    return node;
  }

  void record_line(const std::string& path) {
    if (lines && !lines->count(path)) (*lines)[path] = line;
  }

  void parse_document() {
    std::vector<std::string> table;  // current [table] path
    while (!done()) {
      skip_spaces();
      skip_comment();
      if (done()) break;
      if (peek() == '\n') {
        take();
        continue;
      }
      if (peek() == '[') {
        take();
        skip_spaces();
        table = parse_dotted_key();
        skip_spaces();
        if (done() || peek() != ']') fail("expected ']' after table name");
        take();
        record_line(joined(table));
        descend(table);
        expect_end_of_line("table header");
        continue;
      }
      std::vector<std::string> key = parse_dotted_key();
      skip_spaces();
      if (done() || peek() != '=') fail("expected '=' after key \"" + joined(key) + "\"");
      take();
      std::vector<std::string> full = table;
      full.insert(full.end(), key.begin(), key.end());
      json* parent = descend({full.begin(), full.end() - 1});
      const std::string& leaf = full.back();
      if (parent->contains(leaf)) fail("duplicate key \"" + joined(full) + "\"");
      record_line(joined(full));
      (*parent)[leaf] = parse_value();
      expect_end_of_line("value");
    }
  }
};

}  // namespace

json parse_toml(const std::string& text, const std::string& origin,
                std::map<std::string, int>* key_lines) {
  TomlParser p{text, origin, key_lines};
  p.parse_document();
  return p.root;
}

// ---------------------------------------------------------------------------
// Flat key reader with unknown-key rejection
// ---------------------------------------------------------------------------

namespace {

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out,
             const std::string& origin) {
  if (j.is_object()) {
    if (j.empty()) {
      if (!prefix.empty()) out[prefix] = j;
      return;
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
      flatten(it.value(), path, out, origin);
    }
    return;
  }
  if (prefix.empty()) throw config_error(origin + ": top level must be a table of keys");
  out[prefix] = j;
}

class Reader {
 public:
  Reader(const json& root, std::string origin, std::map<std::string, int> lines)
      : origin_(std::move(origin)), lines_(std::move(lines)) {
    flatten(root, "", leaves_, origin_);
  }

  std::string where(const std::string& path) const {
    const auto it = lines_.find(path);
    if (it != lines_.end()) return origin_ + ":" + std::to_string(it->second);
    return origin_;
  }

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    throw config_error(where(path) + ": " + msg);
  }

  bool block_present(const std::string& name) const {
    if (leaves_.count(name)) return true;  // empty table marker
    const std::string prefix = name + ".";
    const auto it = leaves_.lower_bound(prefix);
    return it != leaves_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
  }

  // Accept an empty [name] table without treating it as an unknown key.
  void allow_block(const std::string& name) {
    if (leaves_.count(name)) consumed_.insert(name);
  }

  bool has(const std::string& path) const { return leaves_.count(path) != 0; }

  std::uint64_t get_u64(const std::string& path, std::uint64_t def) {
    const json* v = find(path);
    if (!v) return def;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer()) {
      const std::int64_t s = v->get<std::int64_t>();
      if (s < 0) fail(path, "\"" + path + "\" must be nonnegative");
      return static_cast<std::uint64_t>(s);
    }
    fail(path, "expected an integer for \"" + path + "\"");
  }

  long get_long(const std::string& path, long def) {
    const json* v = find(path);
    if (!v) return def;
    return to_long(*v, path);
  }

  int get_int(const std::string& path, int def) {
    const long v = get_long(path, def);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      fail(path, "\"" + path + "\" is out of int range");
    return static_cast<int>(v);
  }

  double get_double(const std::string& path, double def) {
    const json* v = find(path);
    if (!v) return def;
    if (!v->is_number()) fail(path, "expected a number for \"" + path + "\"");
    return v->get<double>();
  }

  bool get_bool(const std::string& path, bool def) {
    const json* v = find(path);
    if (!v) return def;
    if (!v->is_boolean()) fail(path, "expected true or false for \"" + path + "\"");
    return v->get<bool>();
  }

  std::string get_string(const std::string& path, const std::string& def) {
    const json* v = find(path);
    if (!v) return def;
    if (!v->is_string()) fail(path, "expected a string for \"" + path + "\"");
    return v->get<std::string>();
  }

  std::vector<double> get_double_array(const std::string& path, std::vector<double> def) {
    const json* v = find(path);
    if (!v) return def;
    if (!v->is_array()) fail(path, "expected an array for \"" + path + "\"");
    std::vector<double> out;
    for (const json& e : *v) {
      if (!e.is_number()) fail(path, "expected numbers in \"" + path + "\"");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<long> get_long_array(const std::string& path, std::vector<long> def) {
    const json* v = find(path);
    if (!v) return def;
    if (!v->is_array()) fail(path, "expected an array for \"" + path + "\"");
    std::vector<long> out;
    for (const json& e : *v) out.push_back(to_long(e, path));
    return out;
  }

  std::vector<std::string> get_string_array(const std::string& path,
                                            std::vector<std::string> def) {
    const json* v = find(path);
    if (!v) return def;
    if (!v->is_array()) fail(path, "expected an array for \"" + path + "\"");
    std::vector<std::string> out;
    for (const json& e : *v) {
      if (!e.is_string()) fail(path, "expected strings in \"" + path + "\"");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  // Every leaf must have been consumed by a getter; anything left over is
  // an unknown key.
  void finish() const {
    for (const auto& [path, value] : leaves_) {
      if (!consumed_.count(path)) fail(path, "unknown config key \"" + path + "\"");
    }
  }

 private:
  long to_long(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) {
      const std::uint64_t u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<long>::max()))
        fail(path, "\"" + path + "\" is out of range");
      return static_cast<long>(u);
    }
    if (v.is_number_integer()) return static_cast<long>(v.get<std::int64_t>());
    fail(path, "expected an integer for \"" + path + "\"");
  }

  const json* find(const std::string& path) {
    const auto it = leaves_.find(path);
    if (it == leaves_.end()) return nullptr;
    consumed_.insert(path);
    return &it->second;
  }

  std::map<std::string, json> leaves_;
  std::string origin_;
  std::map<std::string, int> lines_;
  std::set<std::string> consumed_;
};

BaselineKind baseline_from_string(const std::string& s) {
  if (s == "chosen") return BaselineKind::Chosen;
  if (s == "ref") return BaselineKind::Ref;
  throw config_error("unknown baseline \"" + s + "\"; expected \"chosen\" or \"ref\"");
}

std::string baseline_to_string(BaselineKind b) {
  switch (b) {
    case BaselineKind::Chosen: return "chosen";
    case BaselineKind::Ref: return "ref";
    case BaselineKind::Custom: break;
  }
  throw config_error("custom baselines cannot be expressed in a config file");
}

void read_instance_block(Reader& r, InstanceSpec& s) {
  r.allow_block("instance");
  s.name = r.get_string("instance.name", s.name);
  s.file = r.get_string("instance.file", s.file);
  s.num_prompts = r.get_int("instance.num_prompts", s.num_prompts);
  s.num_responses = r.get_int("instance.num_responses", s.num_responses);
  s.reward_bound = r.get_double("instance.reward_bound", s.reward_bound);
  s.rewards = r.get_double_array("instance.rewards", s.rewards);
  s.ref_probs = r.get_double_array("instance.ref_probs", s.ref_probs);
  s.d0 = r.get_double_array("instance.d0", s.d0);
}

void read_trainer_block(Reader& r, TrainerConfig& t) {
  r.allow_block("trainer");
  t.beta = r.get_double("trainer.beta", t.beta);
  t.eta = r.get_double("trainer.eta", t.eta);
  t.learning_rate = r.get_double("trainer.learning_rate", t.learning_rate);
  t.steps = r.get_int("trainer.steps", t.steps);
  t.batch = r.get_int("trainer.batch", t.batch);
  if (r.has("trainer.baseline"))
    t.baseline = baseline_from_string(r.get_string("trainer.baseline", ""));
  t.baseline_smoothing = r.get_double("trainer.baseline_smoothing", t.baseline_smoothing);
  t.epsilon_floor = r.get_double("trainer.epsilon_floor", t.epsilon_floor);
  t.log_every = r.get_int("trainer.log_every", t.log_every);
}

void read_solver_block(Reader& r, SolverOptions& s) {
  r.allow_block("solver");
  s.inner_tol = r.get_double("solver.inner_tol", s.inner_tol);
  s.outer_tol = r.get_double("solver.outer_tol", s.outer_tol);
  s.max_inner_iters = r.get_int("solver.max_inner_iters", s.max_inner_iters);
  s.max_outer_iters = r.get_int("solver.max_outer_iters", s.max_outer_iters);
  s.certification_tol = r.get_double("solver.certification_tol", s.certification_tol);
  s.record_trace = r.get_bool("solver.record_trace", s.record_trace);
}

void read_reward_class_block(Reader& r, RewardClassSpec& c) {
  r.allow_block("reward_class");
  c.lower = r.get_double("reward_class.lower", c.lower);
  c.bound = r.get_double("reward_class.bound", c.bound);
  c.grid_step = r.get_double("reward_class.grid_step", c.grid_step);
}

}  // namespace

// ---------------------------------------------------------------------------
// InstanceSpec
// ---------------------------------------------------------------------------

bool InstanceSpec::inline_given() const {
  return num_prompts != 0 || num_responses != 0 || !rewards.empty() || !ref_probs.empty() ||
         !d0.empty();
}

bool InstanceSpec::present() const { return !name.empty() || !file.empty() || inline_given(); }

BanditInstance InstanceSpec::resolve() const {
  const int forms = (name.empty() ? 0 : 1) + (file.empty() ? 0 : 1) + (inline_given() ? 1 : 0);
  if (forms == 0)
    throw config_error("an [instance] block is required: give name, file, or an inline table");
  if (forms > 1)
    throw config_error("[instance] must use exactly one form: name, file, or an inline table");
  if (!name.empty()) {
    if (name == "figure1") return figure1_instance();
    if (name == "wellcovered") return wellcovered_instance();
    throw config_error("unknown instance name \"" + name +
                       "\"; expected \"figure1\" or \"wellcovered\"");
  }
  if (!file.empty()) return read_instance_json(file);
  if (num_prompts <= 0 || num_responses <= 0)
    throw config_error("inline [instance] needs positive num_prompts and num_responses");
  const std::size_t cells = static_cast<std::size_t>(num_prompts) * num_responses;
  if (rewards.size() != cells)
    throw config_error("inline [instance] rewards must have num_prompts*num_responses entries");
  if (ref_probs.size() != cells)
    throw config_error("inline [instance] ref_probs must have num_prompts*num_responses entries");
  Grid rg(num_prompts, num_responses);
  rg.v = rewards;
  Grid pg(num_prompts, num_responses);
  pg.v = ref_probs;
  PromptDistribution dist =
      d0.empty() ? PromptDistribution::uniform(num_prompts) : PromptDistribution(d0);
  if (dist.num_prompts() != num_prompts)
    throw config_error("inline [instance] d0 must have num_prompts entries");
  return BanditInstance::make(RewardTable{std::move(rg), reward_bound},
                              TabularPolicy::from_probs(pg), std::move(dist));
}

// ---------------------------------------------------------------------------
// RunConfig validation
// ---------------------------------------------------------------------------

namespace {

void require_one_data_source(const std::string& data, long n, const std::string& block) {
  if (data.empty() && n <= 0)
    throw config_error("[" + block + "] needs a data file or a positive n");
  if (!data.empty() && n > 0)
    throw config_error("[" + block + "] data and n are mutually exclusive");
}

}  // namespace

void RunConfig::validate() const {
  if (!seed_given) throw config_error("seed is required (config key \"seed\" or flag --seed)");
  if (format != "csv" && format != "json")
    throw config_error("format must be \"csv\" or \"json\", not \"" + format + "\"");
  if (out_dir.empty()) throw config_error("out_dir must not be empty");

  const auto require_instance = [&] {
    if (!instance.present())
      throw config_error("command \"" + to_string(command) + "\" needs an [instance] block");
    const int forms = (instance.name.empty() ? 0 : 1) + (instance.file.empty() ? 0 : 1) +
                      (instance.inline_given() ? 1 : 0);
    if (forms > 1)
      throw config_error("[instance] must use exactly one form: name, file, or an inline table");
  };

  switch (command) {
    case Command::Gen:
      require_instance();
      if (gen.n < 1) throw config_error("[gen] n must be at least 1");
      break;
    case Command::Train:
      require_instance();
      if (train.method != "dpo" && train.method != "rpo")
        throw config_error("[train] method must be \"dpo\" or \"rpo\"");
      require_one_data_source(train.data, train.n, "train");
      trainer.validate();
      break;
    case Command::Solve:
      require_instance();
      if (solve.method != "maximin" && solve.method != "minimax" && solve.method != "duality")
        throw config_error("[solve] method must be \"maximin\", \"minimax\", or \"duality\"");
      if (solve.hyper != "fixed" && solve.hyper != "theory")
        throw config_error("[solve] hyper must be \"fixed\" or \"theory\"");
      require_one_data_source(solve.data, solve.n, "solve");
      if (!(solve.beta > 0.0)) throw config_error("[solve] beta must be positive");
      if (solve.eta < 0.0) throw config_error("[solve] eta must be nonnegative");
      if (!(solve.delta > 0.0 && solve.delta < 1.0))
        throw config_error("[solve] delta must lie in (0, 1)");
      if (solve.baseline_smoothing < 0.0)
        throw config_error("[solve] baseline_smoothing must be nonnegative");
      solver.validate();
      reward_class.validate();
      break;
    case Command::Sweep: {
      require_instance();
      sweep_method_from_string(sweep.method);
      hyper_mode_from_string(sweep.hyper);
      if (sweep.n_grid.empty()) throw config_error("[sweep] n_grid must not be empty");
      for (long n : sweep.n_grid)
        if (n < 1) throw config_error("[sweep] n_grid entries must be at least 1");
      if (sweep.seeds_per_n < 1) throw config_error("[sweep] seeds_per_n must be at least 1");
      if (!(sweep.beta > 0.0)) throw config_error("[sweep] beta must be positive");
      if (sweep.eta < 0.0) throw config_error("[sweep] eta must be nonnegative");
      if (!(sweep.delta > 0.0 && sweep.delta < 1.0))
        throw config_error("[sweep] delta must lie in (0, 1)");
      if (sweep.baseline_smoothing < 0.0)
        throw config_error("[sweep] baseline_smoothing must be nonnegative");
      trainer.validate();
      solver.validate();
      reward_class.validate();
      break;
    }
    case Command::Figure1:
      if (figure1.eta_grid.empty()) throw config_error("[figure1] eta_grid must not be empty");
      for (double e : figure1.eta_grid)
        if (e < 0.0) throw config_error("[figure1] eta_grid entries must be nonnegative");
      if (!(figure1.beta > 0.0)) throw config_error("[figure1] beta must be positive");
      if (figure1.steps < 1) throw config_error("[figure1] steps must be at least 1");
      break;
    case Command::Check: {
      if (check.suites.empty()) throw config_error("[check] suites must not be empty");
      std::set<std::string> seen;
      for (const std::string& s : check.suites) {
        if (s != "gradients" && s != "duality" && s != "closed_form" && s != "sigmoid")
          throw config_error("unknown check suite \"" + s +
                             "\"; expected gradients, duality, closed_form, or sigmoid");
        if (!seen.insert(s).second) throw config_error("check suite \"" + s + "\" listed twice");
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// parse_config
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::pair<std::string, Command>>& command_blocks() {
  static const std::vector<std::pair<std::string, Command>> blocks = {
      {"gen", Command::Gen},       {"train", Command::Train},
      {"solve", Command::Solve},   {"sweep", Command::Sweep},
      {"figure1", Command::Figure1}, {"check", Command::Check}};
  return blocks;
}

// Auxiliary blocks each command is allowed (and expected) to consume.
bool command_uses(Command c, const std::string& block) {
  if (block == "instance")
    return c == Command::Gen || c == Command::Train || c == Command::Solve || c == Command::Sweep;
  if (block == "trainer") return c == Command::Train || c == Command::Sweep;
  if (block == "solver") return c == Command::Solve || c == Command::Sweep;
  if (block == "reward_class") return c == Command::Solve || c == Command::Sweep;
  return false;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin,
                       const Overrides& overrides) {
  json root;
  std::map<std::string, int> lines;
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    root = json::parse(text, nullptr, false);
    if (root.is_discarded()) throw config_error(origin + ": malformed JSON config");
    if (!root.is_object()) throw config_error(origin + ": top level must be an object");
  } else {
    root = parse_toml(text, origin, &lines);
  }
  Reader r(root, origin, std::move(lines));

  RunConfig cfg;

  // Which command runs: the single command block in the file, optionally
  // cross-checked against (or supplied by) the command named on the
  // command line.
  std::vector<std::string> found;
  for (const auto& [name, cmd] : command_blocks())
    if (r.block_present(name)) found.push_back(name);
  if (!overrides.command.empty()) {
    cfg.command = command_from_string(overrides.command);
    if (found.size() > 1 || (found.size() == 1 && found[0] != overrides.command)) {
      std::string have;
      for (const std::string& f : found) have += (have.empty() ? "[" : ", [") + f + "]";
      throw config_error("command \"" + overrides.command + "\" does not match the config's " +
                         have + " block" + (found.size() > 1 ? "s" : ""));
    }
  } else {
    if (found.empty())
      throw config_error(origin +
                         ": no command block found; add exactly one of [gen], [train], [solve], "
                         "[sweep], [figure1], [check] or name a command on the command line");
    if (found.size() > 1) {
      std::string have;
      for (const std::string& f : found) have += (have.empty() ? "[" : ", [") + f + "]";
      throw config_error(origin + ": exactly one command block is allowed; found " + have);
    }
    cfg.command = command_from_string(found[0]);
  }

  // Auxiliary blocks the chosen command cannot consume are configuration
  // mistakes, reported as such rather than as unknown keys.
  for (const std::string& aux : {"instance", "trainer", "solver", "reward_class"}) {
    if (r.block_present(aux) && !command_uses(cfg.command, aux))
      throw config_error("[" + aux + "] does not apply to command \"" + to_string(cfg.command) +
                         "\"");
  }

  cfg.seed_given = r.has("seed");
  cfg.seed = r.get_u64("seed", 0);
  cfg.out_dir = r.get_string("out_dir", cfg.out_dir);
  cfg.format = r.get_string("format", cfg.format);

  switch (cfg.command) {
    case Command::Gen:
      r.allow_block("gen");
      cfg.gen.n = r.get_long("gen.n", cfg.gen.n);
      read_instance_block(r, cfg.instance);
      break;
    case Command::Train:
      r.allow_block("train");
      cfg.train.method = r.get_string("train.method", cfg.train.method);
      cfg.train.data = r.get_string("train.data", cfg.train.data);
      cfg.train.n = r.get_long("train.n", cfg.train.n);
      read_instance_block(r, cfg.instance);
      read_trainer_block(r, cfg.trainer);
      break;
    case Command::Solve:
      r.allow_block("solve");
      cfg.solve.method = r.get_string("solve.method", cfg.solve.method);
      cfg.solve.data = r.get_string("solve.data", cfg.solve.data);
      cfg.solve.n = r.get_long("solve.n", cfg.solve.n);
      cfg.solve.hyper = r.get_string("solve.hyper", cfg.solve.hyper);
      cfg.solve.beta = r.get_double("solve.beta", cfg.solve.beta);
      cfg.solve.eta = r.get_double("solve.eta", cfg.solve.eta);
      cfg.solve.delta = r.get_double("solve.delta", cfg.solve.delta);
      cfg.solve.baseline_smoothing =
          r.get_double("solve.baseline_smoothing", cfg.solve.baseline_smoothing);
      read_instance_block(r, cfg.instance);
      read_solver_block(r, cfg.solver);
      read_reward_class_block(r, cfg.reward_class);
      break;
    case Command::Sweep:
      r.allow_block("sweep");
      cfg.sweep.n_grid = r.get_long_array("sweep.n_grid", cfg.sweep.n_grid);
      cfg.sweep.seeds_per_n = r.get_int("sweep.seeds_per_n", cfg.sweep.seeds_per_n);
      cfg.sweep.method = r.get_string("sweep.method", cfg.sweep.method);
      cfg.sweep.hyper = r.get_string("sweep.hyper", cfg.sweep.hyper);
      cfg.sweep.delta = r.get_double("sweep.delta", cfg.sweep.delta);
      cfg.sweep.eta = r.get_double("sweep.eta", cfg.sweep.eta);
      cfg.sweep.beta = r.get_double("sweep.beta", cfg.sweep.beta);
      cfg.sweep.baseline_smoothing =
          r.get_double("sweep.baseline_smoothing", cfg.sweep.baseline_smoothing);
      read_instance_block(r, cfg.instance);
      read_trainer_block(r, cfg.trainer);
      read_solver_block(r, cfg.solver);
      read_reward_class_block(r, cfg.reward_class);
      break;
    case Command::Figure1:
      r.allow_block("figure1");
      cfg.figure1.eta_grid = r.get_double_array("figure1.eta_grid", cfg.figure1.eta_grid);
      cfg.figure1.beta = r.get_double("figure1.beta", cfg.figure1.beta);
      cfg.figure1.steps = r.get_int("figure1.steps", cfg.figure1.steps);
      break;
    case Command::Check:
      r.allow_block("check");
      cfg.check.suites = r.get_string_array("check.suites", cfg.check.suites);
      break;
  }

  if (overrides.seed_given) {
    cfg.seed = overrides.seed;
    cfg.seed_given = true;
  }
  if (!overrides.out_dir.empty()) cfg.out_dir = overrides.out_dir;
  if (!overrides.format.empty()) cfg.format = overrides.format;

  r.finish();
  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path, overrides);
}

// ---------------------------------------------------------------------------
// Canonical serialization
// ---------------------------------------------------------------------------

namespace {

json instance_to_config_json(const InstanceSpec& s) {
  json j;
  if (!s.name.empty()) {
    j["name"] = s.name;
  } else if (!s.file.empty()) {
    j["file"] = s.file;
  } else {
    j["num_prompts"] = s.num_prompts;
    j["num_responses"] = s.num_responses;
    j["reward_bound"] = s.reward_bound;
    j["rewards"] = s.rewards;
    j["ref_probs"] = s.ref_probs;
    if (!s.d0.empty()) j["d0"] = s.d0;
  }
  return j;
}

json trainer_to_config_json(const TrainerConfig& t) {
  json j;
  j["beta"] = t.beta;
  j["eta"] = t.eta;
  j["learning_rate"] = t.learning_rate;
  j["steps"] = t.steps;
  j["batch"] = t.batch;
  j["baseline"] = baseline_to_string(t.baseline);
  j["baseline_smoothing"] = t.baseline_smoothing;
  j["epsilon_floor"] = t.epsilon_floor;
  j["log_every"] = t.log_every;
  return j;
}

json solver_to_config_json(const SolverOptions& s) {
  json j;
  j["inner_tol"] = s.inner_tol;
  j["outer_tol"] = s.outer_tol;
  j["max_inner_iters"] = s.max_inner_iters;
  j["max_outer_iters"] = s.max_outer_iters;
  j["certification_tol"] = s.certification_tol;
  j["record_trace"] = s.record_trace;
  return j;
}

json reward_class_to_config_json(const RewardClassSpec& c) {
  json j;
  j["lower"] = c.lower;
  j["bound"] = c.bound;
  j["grid_step"] = c.grid_step;
  return j;
}

}  // namespace

std::string serialize_config(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["format"] = cfg.format;
  switch (cfg.command) {
    case Command::Gen:
      j["gen"]["n"] = cfg.gen.n;
      j["instance"] = instance_to_config_json(cfg.instance);
      break;
    case Command::Train: {
      json t;
      t["method"] = cfg.train.method;
      if (!cfg.train.data.empty())
        t["data"] = cfg.train.data;
      else
        t["n"] = cfg.train.n;
      j["train"] = t;
      j["instance"] = instance_to_config_json(cfg.instance);
      j["trainer"] = trainer_to_config_json(cfg.trainer);
      break;
    }
    case Command::Solve: {
      json s;
      s["method"] = cfg.solve.method;
      if (!cfg.solve.data.empty())
        s["data"] = cfg.solve.data;
      else
        s["n"] = cfg.solve.n;
      s["hyper"] = cfg.solve.hyper;
      s["beta"] = cfg.solve.beta;
      s["eta"] = cfg.solve.eta;
      s["delta"] = cfg.solve.delta;
      s["baseline_smoothing"] = cfg.solve.baseline_smoothing;
      j["solve"] = s;
      j["instance"] = instance_to_config_json(cfg.instance);
      j["solver"] = solver_to_config_json(cfg.solver);
      j["reward_class"] = reward_class_to_config_json(cfg.reward_class);
      break;
    }
    case Command::Sweep: {
      json s;
      s["n_grid"] = cfg.sweep.n_grid;
      s["seeds_per_n"] = cfg.sweep.seeds_per_n;
      s["method"] = cfg.sweep.method;
      s["hyper"] = cfg.sweep.hyper;
      s["delta"] = cfg.sweep.delta;
      s["eta"] = cfg.sweep.eta;
      s["beta"] = cfg.sweep.beta;
      s["baseline_smoothing"] = cfg.sweep.baseline_smoothing;
      j["sweep"] = s;
      j["instance"] = instance_to_config_json(cfg.instance);
      j["trainer"] = trainer_to_config_json(cfg.trainer);
      j["solver"] = solver_to_config_json(cfg.solver);
      j["reward_class"] = reward_class_to_config_json(cfg.reward_class);
      break;
    }
    case Command::Figure1: {
      json f;
      f["eta_grid"] = cfg.figure1.eta_grid;
      f["beta"] = cfg.figure1.beta;
      f["steps"] = cfg.figure1.steps;
      j["figure1"] = f;
      break;
    }
    case Command::Check:
      j["check"]["suites"] = cfg.check.suites;
      break;
  }
  return j.dump(2) + "\n";
}

}  // namespace rpolab::cli
