// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "evoforage/complexity.hpp"
#include "evoforage/evolution.hpp"
#include "evoforage/stats.hpp"

using namespace evoforage;

namespace {

GraphView evolved_graph(int mutations) {
    InnovationRegistry reg;
    Rng rng(7);
    Genome g = initial_genome(rng, reg, 0);
    MutationRates rates;
    for (int i = 0; i < mutations; ++i) g = mutate(g, rates, rng, reg);
    return to_graph(g);
}

void BM_EfficiencyParallel(benchmark::State& state) {
    const GraphView g = evolved_graph(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(global_efficiency(g));
}

void BM_EfficiencySerial(benchmark::State& state) {
    const GraphView g = evolved_graph(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(global_efficiency_serial(g));
}

struct MediationData {
    std::vector<int> seasons;
    std::vector<double> m, y;
};

MediationData mediation_data() {
    MediationData d;
    Rng rng(3);
    for (int i = 0; i < 160; ++i) {
        d.seasons.push_back(1 + i % 4);
        d.m.push_back(-2.0 * (d.seasons.back() > 1) + rng.normal());
        d.y.push_back(10.0 * d.m.back() + rng.normal());
    }
    return d;
}

void BM_MediationParallel(benchmark::State& state) {
    const auto d = mediation_data();
    for (auto _ : state) benchmark::DoNotOptimize(bootstrap_mediation(d.seasons, d.m, d.y, 2000, 1).ci_low);
}

void BM_MediationSerial(benchmark::State& state) {
    const auto d = mediation_data();
    for (auto _ : state) benchmark::DoNotOptimize(bootstrap_mediation_serial(d.seasons, d.m, d.y, 2000, 1).ci_low);
}

void evaluate_bench(benchmark::State& state, Execution execution) {
    EvolutionConfig c;
    c.population_size = 8;
    c.parent_fraction = 0.5;
    c.learn_episodes = 5;
    c.eval_episodes = 5;
    c.train_seed_count = 10;
    c.run_seed = 11;
    const SeedSplit seeds = SeedSplit::derive(c.run_seed, 10, 5);
    const EvolutionState init = initial_state(c);
    for (auto _ : state) {
        auto pop = init.population;
        evaluate_population(pop, c, seeds, 0, execution);
        benchmark::DoNotOptimize(pop.front().fitness);
    }
}

void BM_EvaluateParallel(benchmark::State& state) { evaluate_bench(state, Execution::parallel); }
void BM_EvaluateSerial(benchmark::State& state) { evaluate_bench(state, Execution::serial); }

}  // namespace

BENCHMARK(BM_EfficiencyParallel)->Arg(0)->Arg(100)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_EfficiencySerial)->Arg(0)->Arg(100)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MediationParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MediationSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
