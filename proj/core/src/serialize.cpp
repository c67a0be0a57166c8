#include "rpolab/serialize.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rpolab/dataset.hpp"
#include "rpolab/errors.hpp"

namespace rpolab {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path);
  out << bytes;
  if (!out) throw io_error("write failed: " + path);
}

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw io_error("malformed JSON in " + what);
  return j;
}

json policy_to_json(const TabularPolicy& pol) {
  json j;
  j["K"] = pol.num_prompts();
  j["M"] = pol.num_responses();
  j["logits"] = pol.logits.v;
  std::vector<bool> support(pol.support.begin(), pol.support.end());
  j["support"] = support;
  if (pol.feature_limited()) {
    j["features"] = pol.features;
    j["theta"] = pol.theta;
  }
  return j;
}

TabularPolicy policy_from_json(const json& j, const std::string& what) {
  const int k = j.at("K").get<int>();
  const int m = j.at("M").get<int>();
  if (k <= 0 || m <= 0) throw io_error("invalid policy shape in " + what);
  const auto logits = j.at("logits").get<std::vector<double>>();
  const auto support_bools = j.at("support").get<std::vector<bool>>();
  if (logits.size() != static_cast<std::size_t>(k) * m ||
      support_bools.size() != logits.size())
    throw io_error("policy array lengths do not match K*M in " + what);
  Grid g(k, m, 0.0);
  g.v = logits;
  std::vector<std::uint8_t> support(support_bools.size());
  for (std::size_t i = 0; i < support_bools.size(); ++i) support[i] = support_bools[i] ? 1 : 0;
  TabularPolicy pol;
  if (j.contains("theta") || j.contains("features")) {
    const auto features = j.at("features").get<std::vector<double>>();
    const auto theta = j.at("theta").get<std::vector<double>>();
    if (theta.empty() || features.size() != logits.size() * theta.size())
      throw io_error("policy feature block has inconsistent shape in " + what);
    pol = TabularPolicy::from_features(k, m, static_cast<int>(theta.size()), features, theta,
                                       std::move(support));
  } else {
    pol = TabularPolicy::from_logits(std::move(g), std::move(support));
  }
  try {
    pol.validate();
  } catch (const config_error& e) {
    throw io_error(std::string("invalid policy in ") + what + ": " + e.what());
  }
  return pol;
}

}  // namespace

void write_dataset_jsonl(const PreferenceDataset& data, const std::string& path) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "{\"schema\":\"pref-v1\",\"N\":%d,\"seed\":%" PRIu64 "}\n",
                data.size(), data.seed);
  out += line;
  for (const PreferenceTriple& t : data.triples) {
    std::snprintf(line, sizeof line, "{\"x\":%d,\"a1\":%d,\"a0\":%d,\"y\":%d}\n", t.x, t.a1, t.a0,
                  t.y);
    out += line;
  }
  spit(path, out);
}

PreferenceDataset read_dataset_jsonl(const std::string& path) {
  std::istringstream in(slurp(path));
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty dataset file " + path);
  const json header = parse_json(line, path);
  if (!header.contains("schema") || header["schema"] != "pref-v1")
    throw io_error("unsupported dataset schema in " + path);
  if (!header.contains("N") || !header.contains("seed"))
    throw io_error("dataset header missing N or seed in " + path);
  PreferenceDataset data;
  data.seed = header["seed"].get<std::uint64_t>();
  const int n = header["N"].get<int>();
  if (n < 0) throw io_error("negative N in " + path);
  data.triples.reserve(static_cast<std::size_t>(n));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = parse_json(line, path);
    PreferenceTriple t;
    t.x = j.at("x").get<int>();
    t.a1 = j.at("a1").get<int>();
    t.a0 = j.at("a0").get<int>();
    t.y = j.at("y").get<int>();
    if (t.x < 0 || t.a1 < 0 || t.a0 < 0 || t.a1 == t.a0 || (t.y != 0 && t.y != 1))
      throw io_error("invalid comparison record in " + path);
    data.triples.push_back(t);
  }
  if (data.size() != n)
    throw io_error("dataset header N does not match record count in " + path);
  return data;
}

void write_policy_json(const TabularPolicy& pol, const std::string& path) {
  json j = policy_to_json(pol);
  j["schema"] = "policy-v1";
  spit(path, j.dump() + "\n");
}

TabularPolicy read_policy_json(const std::string& path) {
  const json j = parse_json(slurp(path), path);
  if (!j.contains("schema") || j["schema"] != "policy-v1")
    throw io_error("unsupported policy schema in " + path);
  return policy_from_json(j, path);
}

void write_instance_json(const BanditInstance& inst, const std::string& path) {
  json j;
  j["schema"] = "instance-v1";
  j["K"] = inst.num_prompts;
  j["M"] = inst.num_responses;
  j["reward_bound"] = inst.true_reward.bound;
  j["reward_values"] = inst.true_reward.values.v;
  j["reference"] = policy_to_json(inst.reference_policy);
  j["d0"] = inst.d0.w;
  json b;
  b["prompt_weights"] = inst.behavior.prompt_weights.w;
  if (inst.behavior.kind == BehaviorSpec::Kind::IidPolicy) {
    b["kind"] = "iid_policy";
    b["policy"] = policy_to_json(inst.behavior.policy);
  } else {
    b["kind"] = "fixed_pairs";
    json pairs = json::array();
    for (const auto& [a1, a0] : inst.behavior.pairs) pairs.push_back(json::array({a1, a0}));
    b["pairs"] = pairs;
  }
  j["behavior"] = b;
  spit(path, j.dump() + "\n");
}

BanditInstance read_instance_json(const std::string& path) {
  const json j = parse_json(slurp(path), path);
  if (!j.contains("schema") || j["schema"] != "instance-v1")
    throw io_error("unsupported instance schema in " + path);
  BanditInstance inst;
  try {
    inst.num_prompts = j.at("K").get<int>();
    inst.num_responses = j.at("M").get<int>();
    if (inst.num_prompts <= 0 || inst.num_responses <= 0)
      throw io_error("invalid instance shape in " + path);
    const auto values = j.at("reward_values").get<std::vector<double>>();
    if (values.size() != static_cast<std::size_t>(inst.num_prompts) * inst.num_responses)
      throw io_error("reward table length does not match K*M in " + path);
    Grid g(inst.num_prompts, inst.num_responses, 0.0);
    g.v = values;
    inst.true_reward = RewardTable{std::move(g), j.at("reward_bound").get<double>()};
    inst.reference_policy = policy_from_json(j.at("reference"), path);
    inst.d0 = PromptDistribution{j.at("d0").get<std::vector<double>>()};
    const json& b = j.at("behavior");
    inst.behavior.prompt_weights =
        PromptDistribution{b.at("prompt_weights").get<std::vector<double>>()};
    const std::string kind = b.at("kind").get<std::string>();
    if (kind == "iid_policy") {
      inst.behavior.kind = BehaviorSpec::Kind::IidPolicy;
      inst.behavior.policy = policy_from_json(b.at("policy"), path);
    } else if (kind == "fixed_pairs") {
      inst.behavior.kind = BehaviorSpec::Kind::FixedPairs;
      for (const json& p : b.at("pairs")) {
        if (!p.is_array() || p.size() != 2)
          throw io_error("behavior pair is not a two-element array in " + path);
        inst.behavior.pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
      }
    } else {
      throw io_error("unknown behavior kind \"" + kind + "\" in " + path);
    }
    inst.validate();
  } catch (const json::exception& e) {
    throw io_error("malformed instance in " + path + ": " + e.what());
  } catch (const config_error& e) {
    throw io_error("invalid instance in " + path + ": " + e.what());
  }
  return inst;
}

}  // namespace rpolab
