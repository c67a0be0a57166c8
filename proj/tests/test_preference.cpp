#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "helpers.hpp"
#include "rpolab/aggregate.hpp"
#include "rpolab/dataset.hpp"
#include "rpolab/errors.hpp"
#include "rpolab/math.hpp"
#include "rpolab/preference.hpp"

using namespace rpolab;
using namespace rpolab::testing;

namespace {

RewardTable constant_table(int k, int m, double c, double bound) {
  Grid g(k, m, c);
  return RewardTable(std::move(g), bound);
}

std::string temp_path(const char* name) {
  return std::string("./") + name;
}

}  // namespace

TEST_CASE("comparison probability is a logistic function of the reward difference") {
  const BanditInstance inst = three_response_instance();
  // Equal rewards tie exactly.
  CHECK(bt_prob(inst.true_reward, 0, 1, 1) == 0.5);
  // Reward difference 0.5 between the first two responses.
  CHECK(bt_prob(inst.true_reward, 0, 0, 1) ==
        doctest::Approx(0.62245933120185456464).epsilon(1e-14));
  // Swapping the pair complements the probability.
  CHECK(bt_prob(inst.true_reward, 0, 0, 2) + bt_prob(inst.true_reward, 0, 2, 0) ==
        doctest::Approx(1.0).epsilon(1e-15));
  // Larger difference, larger win probability.
  CHECK(bt_prob(inst.true_reward, 0, 0, 2) > bt_prob(inst.true_reward, 0, 0, 1));
}

TEST_CASE("label sampling matches the comparison probability in frequency") {
  const BanditInstance inst = three_response_instance();
  SplitMix64 rng(11);
  const int n = 100000;
  int wins = 0;
  for (int i = 0; i < n; ++i) wins += sample_label(inst.true_reward, 0, 0, 1, rng);
  // p = 0.6225, standard deviation of the mean is 0.0015; allow 6 sigma.
  CHECK(static_cast<double>(wins) / n ==
        doctest::Approx(0.62245933120185456464).epsilon(0.016));
}

TEST_CASE("generated comparisons are valid, reproducible, and seed-sensitive") {
  const BanditInstance inst = three_response_instance();
  SplitMix64 rng(5);
  const PreferenceDataset data = generate_dataset(inst, 500, rng);
  REQUIRE(data.size() == 500);
  for (const PreferenceTriple& t : data.triples) {
    CHECK(t.x == 0);
    CHECK(t.a1 >= 0);
    CHECK(t.a1 < 3);
    CHECK(t.a0 >= 0);
    CHECK(t.a0 < 3);
    CHECK(t.a1 != t.a0);
    CHECK((t.y == 0 || t.y == 1));
  }
  SplitMix64 rng_again(5);
  CHECK(generate_dataset(inst, 500, rng_again).triples == data.triples);
  SplitMix64 rng_other(6);
  CHECK(generate_dataset(inst, 500, rng_other).triples != data.triples);
}

TEST_CASE("generated labels follow the comparison law per ordered pair") {
  const BanditInstance inst = three_response_instance();
  SplitMix64 rng(17);
  const PreferenceDataset data = generate_dataset(inst, 40000, rng);
  std::map<std::pair<int, int>, std::pair<int, int>> wins_and_counts;
  for (const PreferenceTriple& t : data.triples) {
    auto& [w, c] = wins_and_counts[{t.a1, t.a0}];
    w += t.y;
    c += 1;
  }
  for (const auto& [pair, wc] : wins_and_counts) {
    const auto [w, c] = wc;
    if (c < 1500) continue;
    const double p = bt_prob(inst.true_reward, 0, pair.first, pair.second);
    CHECK(static_cast<double>(w) / c == doctest::Approx(p).epsilon(0.05));
  }
}

TEST_CASE("generated prompts follow the behavior prompt weights") {
  SplitMix64 mk(21);
  Grid r(3, 3);
  for (double& v : r.v) v = 0.5;
  BanditInstance inst = BanditInstance::make(
      RewardTable(std::move(r), 1.0), random_policy(mk, 3, 3),
      PromptDistribution({0.5, 0.3, 0.2}));
  SplitMix64 rng(13);
  const PreferenceDataset data = generate_dataset(inst, 50000, rng);
  std::vector<int> counts(3, 0);
  for (const PreferenceTriple& t : data.triples) ++counts[t.x];
  CHECK(counts[0] / 50000.0 == doctest::Approx(0.5).epsilon(0.02));
  CHECK(counts[1] / 50000.0 == doctest::Approx(0.3).epsilon(0.03));
  CHECK(counts[2] / 50000.0 == doctest::Approx(0.2).epsilon(0.04));
}

TEST_CASE("fixed-pair behavior always compares the configured pair") {
  Grid r(2, 3);
  r.at(0, 0) = 1.0;
  r.at(1, 2) = 0.8;
  BanditInstance inst;
  inst.num_prompts = 2;
  inst.num_responses = 3;
  inst.true_reward = RewardTable(std::move(r), 1.0);
  inst.reference_policy = TabularPolicy::uniform(2, 3);
  inst.d0 = PromptDistribution({0.7, 0.3});
  inst.behavior.kind = BehaviorSpec::Kind::FixedPairs;
  inst.behavior.prompt_weights = inst.d0;
  inst.behavior.pairs = {{0, 1}, {2, 0}};
  inst.validate();

  SplitMix64 rng(23);
  const PreferenceDataset data = generate_dataset(inst, 2000, rng);
  for (const PreferenceTriple& t : data.triples) {
    if (t.x == 0) {
      CHECK(t.a1 == 0);
      CHECK(t.a0 == 1);
    } else {
      CHECK(t.a1 == 2);
      CHECK(t.a0 == 0);
    }
  }
  CHECK(inst.pair_prob(0, 0, 1) == 0.7);
  CHECK(inst.pair_prob(0, 1, 0) == 0.0);
  CHECK(inst.pair_prob(1, 2, 0) == 0.3);
}

TEST_CASE("pair probabilities of policy-driven collection sum to one") {
  const BanditInstance inst = three_response_instance();
  // 0.45 * 0.45 / (1 - (0.45^2 + 0.45^2 + 0.1^2)) = 9/26.
  CHECK(inst.pair_prob(0, 0, 1) ==
        doctest::Approx(0.34615384615384615385).epsilon(1e-14));
  double total = 0.0;
  for (int a1 = 0; a1 < 3; ++a1)
    for (int a0 = 0; a0 < 3; ++a0) total += inst.pair_prob(0, a1, a0);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(inst.pair_prob(0, 1, 1) == 0.0);
}

TEST_CASE("environment validation rejects inconsistent pieces") {
  // Behavior support escaping the reference support.
  {
    BanditInstance inst = three_response_instance();
    Grid narrow(1, 3);
    narrow.at(0, 0) = 0.5;
    narrow.at(0, 1) = 0.5;
    inst.reference_policy = TabularPolicy::from_probs(narrow);
    CHECK_THROWS_AS(inst.validate(), config_error);
  }
  // Only one sampleable response on a weighted prompt.
  {
    BanditInstance inst = three_response_instance();
    Grid point(1, 3);
    point.at(0, 0) = 1.0;
    inst.behavior.policy = TabularPolicy::from_probs(point);
    CHECK_THROWS_AS(inst.validate(), config_error);
  }
  // Reward shape mismatch.
  {
    BanditInstance inst = three_response_instance();
    inst.true_reward = constant_table(1, 4, 0.5, 1.0);
    CHECK_THROWS_AS(inst.validate(), config_error);
  }
  // Fixed pair with identical responses.
  {
    BanditInstance inst = three_response_instance();
    inst.behavior.kind = BehaviorSpec::Kind::FixedPairs;
    inst.behavior.pairs = {{1, 1}};
    CHECK_THROWS_AS(inst.validate(), config_error);
  }
}

TEST_CASE("likelihood loss at an uninformative table is ln 2 per comparison") {
  const BanditInstance inst = three_response_instance();
  SplitMix64 rng(31);
  const PreferenceDataset data = generate_dataset(inst, 100, rng);
  const RewardTable zero = constant_table(1, 3, 0.0, 1.0);
  CHECK(mle_loss(zero, data) == doctest::Approx(0.69314718055994530942).epsilon(1e-13));
}

TEST_CASE("true rewards fit sampled labels at least as well as a flat table on average") {
  const BanditInstance inst = three_response_instance();
  const RewardTable zero = constant_table(1, 3, 0.0, 1.0);
  double at_truth = 0.0;
  double at_zero = 0.0;
  for (int seed = 0; seed < 50; ++seed) {
    SplitMix64 rng(1000 + static_cast<std::uint64_t>(seed));
    const PreferenceDataset data = generate_dataset(inst, 100, rng);
    at_truth += mle_loss(inst.true_reward, data);
    at_zero += mle_loss(zero, data);
  }
  CHECK(at_truth / 50.0 <= at_zero / 50.0);
}

TEST_CASE("aggregated and raw likelihood evaluations agree") {
  SplitMix64 mk(41);
  const BanditInstance inst = random_instance(mk, 2, 4);
  SplitMix64 rng(43);
  const PreferenceDataset data = generate_dataset(inst, 300, rng);
  const AggregatedData agg = AggregatedData::from(data);
  CHECK(mle_loss(inst.true_reward, agg) ==
        doctest::Approx(mle_loss(inst.true_reward, data)).epsilon(1e-12));
  const Grid g_raw = mle_gradient(inst.true_reward, data);
  const Grid g_agg = mle_gradient(inst.true_reward, agg);
  REQUIRE(g_raw.same_shape(g_agg));
  for (std::size_t i = 0; i < g_raw.v.size(); ++i)
    CHECK(std::fabs(g_agg.v[i] - g_raw.v[i]) <= 1e-13);
}

TEST_CASE("likelihood is invariant to a per-prompt constant reward shift") {
  SplitMix64 mk(47);
  const BanditInstance inst = random_instance(mk, 3, 3);
  SplitMix64 rng(53);
  const PreferenceDataset data = generate_dataset(inst, 200, rng);
  RewardTable shifted = inst.true_reward;
  shifted.bound = 2.0;
  for (int a = 0; a < 3; ++a) shifted.at(1, a) += 0.5;
  shifted.validate();
  RewardTable wide = inst.true_reward;
  wide.bound = 2.0;
  CHECK(mle_loss(shifted, data) == doctest::Approx(mle_loss(wide, data)).epsilon(1e-12));
}

TEST_CASE("likelihood gradient of a single comparison at a flat table") {
  const PreferenceDataset data = one_comparison();
  const RewardTable zero = constant_table(1, 3, 0.0, 1.0);
  const Grid g = mle_gradient(zero, data);
  // d/dr(a1) of -ln sigmoid(0) is -1/2; the rejected response gets +1/2.
  CHECK(g.at(0, 0) == -0.5);
  CHECK(g.at(0, 1) == 0.5);
  CHECK(g.at(0, 2) == 0.0);
}

TEST_CASE("opposite comparisons cancel the likelihood gradient at a tie") {
  PreferenceDataset data;
  data.triples = {{0, 0, 1, 1}, {0, 1, 0, 1}};
  const RewardTable zero = constant_table(1, 3, 0.0, 1.0);
  const Grid g = mle_gradient(zero, data);
  for (double v : g.v) CHECK(v == 0.0);
}

TEST_CASE("likelihood gradient matches finite differences closely on one instance") {
  SplitMix64 mk(59);
  const BanditInstance inst = random_instance(mk, 1, 3);
  SplitMix64 rng(61);
  const PreferenceDataset data = generate_dataset(inst, 100, rng);
  const RewardTable at = random_reward(mk, 1, 3, 1.0, 0.01);
  const Grid g = mle_gradient(at, data);
  const auto f = [&](const std::vector<double>& v) {
    RewardTable t = at;
    t.values.v = v;
    return mle_loss(t, data);
  };
  const std::vector<double> fd = central_difference(f, at.values.v);
  CHECK(gradient_disagreement(g.v, fd) <= 1e-6);
}

TEST_CASE("likelihood gradient matches finite differences on 100 random instances") {
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    SplitMix64 mk(2000 + static_cast<std::uint64_t>(seed));
    const int k = 1 + static_cast<int>(mk.next_below(3));
    const int m = 2 + static_cast<int>(mk.next_below(3));
    const BanditInstance inst = random_instance(mk, k, m);
    SplitMix64 rng(3000 + static_cast<std::uint64_t>(seed));
    const PreferenceDataset data = generate_dataset(inst, 50, rng);
    const RewardTable at = random_reward(mk, k, m, 1.0, 0.01);
    const Grid g = mle_gradient(at, data);
    const auto f = [&](const std::vector<double>& v) {
      RewardTable t = at;
      t.values.v = v;
      return mle_loss(t, data);
    };
    const std::vector<double> fd = central_difference(f, at.values.v);
    worst = std::max(worst, gradient_disagreement(g.v, fd));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("label-law distances: zero at equal rewards, frozen value, ordering") {
  const BanditInstance inst = three_response_instance();
  const RewardTable zero = constant_table(1, 3, 0.0, 1.0);
  CHECK(tv_bt(zero, zero, 0, 0, 1) == 0.0);
  CHECK(hellinger_sq_bt(zero, zero, 0, 0, 1) == 0.0);
  // Reward differences 0.5 vs 0 on the pair (0, 1).
  CHECK(tv_bt(inst.true_reward, zero, 0, 0, 1) ==
        doctest::Approx(0.12245933120185456464).epsilon(1e-14));
  CHECK(hellinger_sq_bt(inst.true_reward, zero, 0, 0, 1) ==
        doctest::Approx(0.015286605506873400518).epsilon(1e-13));
}

TEST_CASE("squared Hellinger dominates squared total variation and stays below it") {
  SplitMix64 mk(67);
  int checked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const RewardTable r1 = random_reward(mk, 1, 2, 2.0);
    const RewardTable r2 = random_reward(mk, 1, 2, 2.0);
    const double tv = tv_bt(r1, r2, 0, 0, 1);
    const double h2 = hellinger_sq_bt(r1, r2, 0, 0, 1);
    REQUIRE(h2 >= tv * tv - 1e-15);
    REQUIRE(h2 <= tv + 1e-15);
    ++checked;
  }
  CHECK(checked == 10000);
}

TEST_CASE("logistic slope bounds hold over the bounded-argument range") {
  CHECK(sigmoid_kappa(0.0) == 0.25);
  CHECK(sigmoid_kappa(1.0) == doctest::Approx(0.072329488128513268211).epsilon(1e-14));
  SplitMix64 mk(71);
  for (double bound : {0.5, 1.0, 2.0}) {
    const double kappa = sigmoid_kappa(bound);
    for (int trial = 0; trial < 10000; ++trial) {
      const double z1 = bound * (2.0 * mk.next_double() - 1.0);
      const double z2 = bound * (2.0 * mk.next_double() - 1.0);
      const double ds = std::fabs(sigmoid(z1) - sigmoid(z2));
      const double dz = std::fabs(z1 - z2);
      REQUIRE(ds >= kappa * dz - 1e-15);
      REQUIRE(ds <= dz + 1e-15);
    }
  }
}

TEST_CASE("comparison records group into sorted weighted cells") {
  PreferenceDataset data;
  data.triples = {{0, 1, 0, 1}, {0, 1, 0, 1}, {0, 0, 1, 1}, {1, 2, 0, 0}};
  const AggregatedData agg = AggregatedData::from(data);
  CHECK(agg.total == 4.0);
  REQUIRE(agg.cells.size() == 3);
  CHECK(agg.cells[0].x == 0);
  CHECK(agg.cells[0].a1 == 0);
  CHECK(agg.cells[0].weight == 1.0);
  CHECK(agg.cells[1].a1 == 1);
  CHECK(agg.cells[1].weight == 2.0);
  CHECK(agg.cells[2].x == 1);
  CHECK(agg.cells[2].y == 0);
  for (std::size_t i = 1; i < agg.cells.size(); ++i) {
    const auto key = [](const PairCell& c) { return std::tuple(c.x, c.a1, c.a0, c.y); };
    CHECK(key(agg.cells[i - 1]) < key(agg.cells[i]));
  }
}

TEST_CASE("comparison files round-trip exactly and write identical bytes") {
  const BanditInstance inst = three_response_instance();
  SplitMix64 rng(73);
  PreferenceDataset data = generate_dataset(inst, 200, rng);
  data.seed = 73;
  const std::string path = temp_path("roundtrip.jsonl");
  write_dataset_jsonl(data, path);
  const PreferenceDataset back = read_dataset_jsonl(path);
  CHECK(back == data);

  const std::string path2 = temp_path("roundtrip2.jsonl");
  write_dataset_jsonl(data, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("comparison files with invalid records are rejected") {
  const std::string path = temp_path("bad.jsonl");
  const auto write_text = [&](const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
  };
  write_text("{\"schema\":\"other\",\"N\":0,\"seed\":0}\n");
  CHECK_THROWS_AS(read_dataset_jsonl(path), io_error);
  write_text("{\"schema\":\"pref-v1\",\"N\":1,\"seed\":0}\n{\"x\":0,\"a1\":1,\"a0\":1,\"y\":1}\n");
  CHECK_THROWS_AS(read_dataset_jsonl(path), io_error);
  write_text("{\"schema\":\"pref-v1\",\"N\":1,\"seed\":0}\n{\"x\":0,\"a1\":1,\"a0\":0,\"y\":2}\n");
  CHECK_THROWS_AS(read_dataset_jsonl(path), io_error);
  write_text("{\"schema\":\"pref-v1\",\"N\":2,\"seed\":0}\n{\"x\":0,\"a1\":1,\"a0\":0,\"y\":1}\n");
  CHECK_THROWS_AS(read_dataset_jsonl(path), io_error);
  CHECK_THROWS_AS(read_dataset_jsonl("./no_such_file.jsonl"), io_error);
  std::remove(path.c_str());
}
