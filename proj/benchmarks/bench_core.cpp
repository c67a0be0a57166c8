// Microbenchmarks for the paths that dominate real runs: loss evaluation
// (raw versus aggregated comparisons), the closed-form tilt policy, the
// inner reward minimization, the certified saddle-point solve, dataset
// generation, and gradient-descent training.  Sizes are fixed and seeds are
// pinned so numbers are comparable across machines and commits.

#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "rpolab/aggregate.hpp"
#include "rpolab/adversarial.hpp"
#include "rpolab/analysis.hpp"
#include "rpolab/dataset.hpp"
#include "rpolab/direct_opt.hpp"
#include "rpolab/instance.hpp"
#include "rpolab/policy.hpp"
#include "rpolab/preference.hpp"
#include "rpolab/rng.hpp"

namespace {

using namespace rpolab;

// Four prompts, six responses, full-support reference, uniform prompts: the
// same shape the sweep and study paths exercise.
BanditInstance bench_instance() { return wellcovered_instance(); }

PreferenceDataset bench_dataset(int n) {
  SplitMix64 rng(2026);
  const BanditInstance inst = bench_instance();
  return generate_dataset(inst, n, rng);
}

void generate_comparisons(benchmark::State& state) {
  const BanditInstance inst = bench_instance();
  const int n = static_cast<int>(state.range(0));
  std::uint64_t salt = 0;
  for (auto _ : state) {
    SplitMix64 rng(2026 + salt++);
    benchmark::DoNotOptimize(generate_dataset(inst, n, rng));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(generate_comparisons)->Arg(256)->Arg(4096);

void preference_loss_raw(benchmark::State& state) {
  const BanditInstance inst = bench_instance();
  const PreferenceDataset data = bench_dataset(static_cast<int>(state.range(0)));
  const TabularPolicy pol = inst.reference_policy;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpo_loss(pol, inst.reference_policy, data, 0.1));
  }
  state.SetItemsProcessed(state.iterations() * data.size());
}
BENCHMARK(preference_loss_raw)->Arg(256)->Arg(4096);

void likelihood_loss_raw(benchmark::State& state) {
  const BanditInstance inst = bench_instance();
  const PreferenceDataset data = bench_dataset(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mle_loss(inst.true_reward, data));
  }
  state.SetItemsProcessed(state.iterations() * data.size());
}
BENCHMARK(likelihood_loss_raw)->Arg(256)->Arg(4096)->Arg(16384);

// Same loss through the (prompt, pair, label) cell aggregation the solvers use:
// cost is bounded by the number of distinct cells, not the sample size.
void likelihood_loss_aggregated(benchmark::State& state) {
  const BanditInstance inst = bench_instance();
  const AggregatedData agg = AggregatedData::from(bench_dataset(static_cast<int>(state.range(0))));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mle_loss(inst.true_reward, agg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(likelihood_loss_aggregated)->Arg(256)->Arg(4096)->Arg(16384);

void closed_form_tilt_policy(benchmark::State& state) {
  const BanditInstance inst = bench_instance();
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimal_kl_policy(inst.true_reward, inst.reference_policy, 0.1));
  }
}
BENCHMARK(closed_form_tilt_policy);

void inner_reward_minimization(benchmark::State& state) {
  const BanditInstance inst = bench_instance();
  const PreferenceDataset data = bench_dataset(512);
  const TabularPolicy base = chosen_policy(data, inst, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        t_adv(inst.reference_policy, inst, base, data, RewardClassSpec{}, 0.3, 0.1));
  }
}
BENCHMARK(inner_reward_minimization);

void certified_saddle_solve(benchmark::State& state) {
  const BanditInstance inst = figure1_instance();
  SplitMix64 rng(41);
  const PreferenceDataset data = generate_dataset(inst, 60, rng);
  const TabularPolicy base = chosen_policy(data, inst, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        duality_gap(inst, base, data, RewardClassSpec{}, 0.3, 0.1, SolverOptions{}));
  }
}
BENCHMARK(certified_saddle_solve);

void gradient_descent_training(benchmark::State& state) {
  const BanditInstance inst = bench_instance();
  const PreferenceDataset data = bench_dataset(200);
  TrainerConfig tc;
  tc.steps = static_cast<int>(state.range(0));
  tc.log_every = tc.steps;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(inst, data, tc, TrainMethod::Rpo));
  }
  state.SetItemsProcessed(state.iterations() * tc.steps);
}
BENCHMARK(gradient_descent_training)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
