#include <gtest/gtest.h>

#include <set>

#include "evoforage/evolution.hpp"
#include "test_util.hpp"

using namespace evoforage;

namespace {

EvolutionConfig tiny(FitnessMode mode = FitnessMode::task, Regime regime = Regime::NEC) {
    EvolutionConfig c;
    c.population_size = 6;
    c.generations = 4;
    c.elites = 1;
    c.parent_fraction = 0.5;
    c.regime = regime;
    c.fitness_mode = mode;
    c.run_seed = 1234;
    c.learn_episodes = 2;
    c.eval_episodes = 2;
    c.train_seed_count = 4;
    c.checkpoint_interval = 2;
    return c;
}

void expect_same_records(const std::vector<GenerationRecord>& a, const std::vector<GenerationRecord>& b) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].generation, b[i].generation);
        EXPECT_EQ(a[i].best_fitness, b[i].best_fitness);
        EXPECT_EQ(a[i].best_task_performance, b[i].best_task_performance);
        EXPECT_EQ(a[i].best_n_s, b[i].best_n_s);
        EXPECT_EQ(a[i].best_n_c, b[i].best_n_c);
        EXPECT_EQ(a[i].mean_fitness, b[i].mean_fitness);
        EXPECT_EQ(a[i].mean_n_s, b[i].mean_n_s);
        EXPECT_EQ(a[i].best_genome_id, b[i].best_genome_id);
        EXPECT_EQ(a[i].n_diverged, b[i].n_diverged);
    }
}

void expect_same_population(const std::vector<Individual>& a, const std::vector<Individual>& b) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].genome, b[i].genome);
        EXPECT_EQ(a[i].fitness, b[i].fitness);
        EXPECT_EQ(a[i].evaluated, b[i].evaluated);
        EXPECT_EQ(a[i].complexity.n_s, b[i].complexity.n_s);
        EXPECT_EQ(a[i].complexity.n_c, b[i].complexity.n_c);
    }
}

std::vector<Individual> with_fitness(const std::vector<double>& f) {
    std::vector<Individual> pop(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        pop[i].fitness = f[i];
        pop[i].genome.genome_id = i;
    }
    return pop;
}

}  // namespace

TEST(Energy, NecIsFlatAndEcScalesWithSize) {
    InnovationRegistry reg;
    Rng rng(1);
    Genome g = initial_genome(rng, reg, 0);
    EXPECT_EQ(energy_rate(Regime::NEC, g), -0.01);
    EXPECT_DOUBLE_EQ(energy_rate(Regime::EC, g), -0.01);

    // Doubling the size doubles the cost: 254 more enabled edges.
    for (int k = 0; k < 254; ++k) g.conns.push_back(g.conns.front());
    ASSERT_EQ(ann_size(g), 508);
    EXPECT_DOUBLE_EQ(energy_rate(Regime::EC, g), -0.02);
    EXPECT_EQ(energy_rate(Regime::NEC, g), -0.01);
}

TEST(RandomFitness, UniformDrawAndPenalty) {
    InnovationRegistry reg;
    Rng rng(2);
    const Genome g = initial_genome(rng, reg, 0);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double f = random_fitness(FitnessMode::random, rng.uniform(), g, 0.5);
        ASSERT_GE(f, 0.0);
        ASSERT_LT(f, 1.0);
        sum += f;
    }
    EXPECT_NEAR(sum / 10000, 0.5, 0.02);
    EXPECT_DOUBLE_EQ(random_fitness(FitnessMode::random_size_penalty, 0.7, g, 0.5), 0.2);

    Genome bigger = g;
    bigger.conns.push_back(g.conns.front());
    EXPECT_LT(random_fitness(FitnessMode::random_size_penalty, 0.7, bigger, 0.5),
              random_fitness(FitnessMode::random_size_penalty, 0.7, g, 0.5));
    EXPECT_THROW(random_fitness(FitnessMode::task, 0.5, g, 0.5), std::invalid_argument);
}

TEST(Population, InitialisedAtBaselineSize) {
    EvolutionConfig c = tiny();
    c.population_size = 20;
    InnovationRegistry reg;
    const auto pop = init_population(c, reg);
    ASSERT_EQ(pop.size(), 20u);
    std::set<std::uint64_t> ids;
    for (const auto& ind : pop) {
        EXPECT_EQ(ann_size(ind.genome), 254);
        EXPECT_FALSE(ind.evaluated);
        ids.insert(ind.genome.genome_id);
    }
    EXPECT_EQ(ids.size(), 20u);
}

TEST(Selection, TopFractionFittestFirst) {
    std::vector<double> f;
    for (int i = 1; i <= 150; ++i) f.push_back(i);
    const auto pop = with_fitness(f);
    const auto s = select_parents(pop, 15, 2);
    ASSERT_EQ(s.parents.size(), 15u);
    for (std::size_t k = 0; k < 15; ++k) EXPECT_EQ(s.parents[k], 149 - k);
    EXPECT_EQ(s.elites, (std::vector<std::size_t>{149, 148}));
}

TEST(Selection, TiesGoToLowerId) {
    const auto pop = with_fitness({1.0, 3.0, 3.0, 2.0, 3.0});
    const auto s = select_parents(pop, 3, 1);
    EXPECT_EQ(s.parents, (std::vector<std::size_t>{1, 2, 4}));
    EXPECT_EQ(s.elites, (std::vector<std::size_t>{1}));
}

TEST(Selection, RejectsBadCounts) {
    const auto pop = with_fitness({1.0, 2.0});
    EXPECT_THROW(select_parents(pop, 0, 0), std::invalid_argument);
    EXPECT_THROW(select_parents(pop, 3, 0), std::invalid_argument);
    EXPECT_THROW(select_parents(pop, 1, 2), std::invalid_argument);
}

TEST(Reproduce, ChildrenAreValidAndFresh) {
    InnovationRegistry reg;
    Rng rng(3);
    std::vector<Genome> parents;
    for (std::uint64_t i = 0; i < 4; ++i) parents.push_back(initial_genome(rng, reg, i));
    std::vector<const Genome*> ptrs;
    for (const auto& p : parents) ptrs.push_back(&p);
    std::uint64_t next_id = 4;
    MutationRates rates;
    rates.conn_delete = 0.3;
    for (int round = 0; round < 5; ++round) {
        const auto kids = reproduce(ptrs, 10, rates, rng, reg, next_id);
        ASSERT_EQ(kids.size(), 10u);
        for (const auto& k : kids) {
            EXPECT_TRUE(is_acyclic(k));
            EXPECT_NO_THROW(validate(k));
        }
    }
    EXPECT_EQ(next_id, 54u);
    EXPECT_THROW(reproduce({}, 1, rates, rng, reg, next_id), std::invalid_argument);
}

TEST(Reproduce, ZeroRatesPreserveIdenticalParents) {
    InnovationRegistry reg;
    Rng rng(4);
    const Genome p = initial_genome(rng, reg, 0);
    MutationRates zero{0, 0, 0, 0, 0, 0};
    std::uint64_t next_id = 1;
    const auto kids = reproduce({&p, &p}, 5, zero, rng, reg, next_id);
    for (const auto& k : kids) {
        EXPECT_EQ(k.nodes, p.nodes);
        EXPECT_EQ(k.conns, p.conns);
        EXPECT_EQ(k.hyper, p.hyper);
        EXPECT_NE(k.genome_id, p.genome_id);
    }
}

TEST(Diverged, GetGenerationMinimum) {
    EvolutionConfig c = tiny();
    auto pop = with_fitness({5.0, -2.0, 9.0, 0.0});
    InnovationRegistry reg;
    Rng rng(5);
    for (auto& ind : pop) ind.genome = initial_genome(rng, reg, ind.genome.genome_id);
    pop[3].diverged = true;
    pop[3].task_performance = 7.0;
    settle_diverged(pop, c);
    EXPECT_EQ(pop[3].fitness, -2.0);
    EXPECT_EQ(pop[3].task_performance, 0.0);

    for (auto& ind : pop) ind.diverged = true;
    settle_diverged(pop, c);
    // Every step poisoned and charged the base energy rate.
    for (const auto& ind : pop) EXPECT_DOUBLE_EQ(ind.fitness, c.world.episode_length * (-0.01 - 1.0));
}

TEST(Config, ValidateRejectsBadValues) {
    EXPECT_NO_THROW(tiny().validate());
    auto bad = [](auto mutate) {
        EvolutionConfig c = tiny();
        mutate(c);
        return c;
    };
    EXPECT_THROW(bad([](auto& c) { c.population_size = 1; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.generations = 0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.elites = 6; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.parent_fraction = 0.0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.parent_fraction = 0.05; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.n_seasons = 5; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.eval_episodes = 0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](auto& c) { c.rates.weight = 2.0; }).validate(), ConfigError);
    EXPECT_EQ(EvolutionConfig{}.parent_count(), 15);
}

TEST(Config, JsonRoundTrip) {
    EvolutionConfig c = tiny(FitnessMode::random_size_penalty, Regime::EC);
    c.n_seasons = 3;
    c.size_penalty_alpha = 0.25;
    c.rates.node_delete = 0.1;
    const EvolutionConfig back = evolution_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(back.regime, Regime::EC);
    EXPECT_EQ(back.fitness_mode, FitnessMode::random_size_penalty);

    const EvolutionConfig partial = evolution_config_from_json({{"generations", 7}}, c);
    EXPECT_EQ(partial.generations, 7);
    EXPECT_EQ(partial.n_seasons, 3);
    EXPECT_THROW(parse_regime("XC"), ConfigError);
}

TEST(Run, RecordsOnePerGenerationAndIsDeterministic) {
    const EvolutionConfig c = tiny();
    EvolutionState a = initial_state(c), b = initial_state(c);
    int calls = 0;
    EvolutionHooks hooks;
    hooks.on_generation = [&](const GenerationRecord& r, const Individual& best) {
        EXPECT_EQ(r.best_fitness, best.fitness);
        ++calls;
    };
    run_evolution(c, a, hooks);
    run_evolution(c, b);
    EXPECT_EQ(calls, c.generations);
    ASSERT_EQ(a.records.size(), static_cast<std::size_t>(c.generations));
    for (int g = 0; g < c.generations; ++g) EXPECT_EQ(a.records[g].generation, g);
    expect_same_records(a.records, b.records);
    expect_same_population(a.population, b.population);
}

TEST(Run, SerialMatchesParallel) {
    const EvolutionConfig c = tiny(FitnessMode::task, Regime::EC);
    EvolutionState a = initial_state(c), b = initial_state(c);
    run_evolution(c, a, {}, Execution::parallel);
    run_evolution(c, b, {}, Execution::serial);
    expect_same_records(a.records, b.records);
    expect_same_population(a.population, b.population);
}

TEST(Run, ElitismKeepsBestFitness) {
    EvolutionConfig c = tiny(FitnessMode::task, Regime::EC);
    c.generations = 6;
    EvolutionState s = initial_state(c);
    run_evolution(c, s);
    for (std::size_t g = 1; g < s.records.size(); ++g)
        EXPECT_GE(s.records[g].best_fitness, s.records[g - 1].best_fitness);
}

TEST(Run, RandomModeSkipsLearning) {
    const EvolutionConfig c = tiny(FitnessMode::random);
    EvolutionState s = initial_state(c);
    run_evolution(c, s);
    for (const auto& r : s.records) {
        EXPECT_EQ(r.best_task_performance, 0.0);
        EXPECT_GE(r.best_fitness, 0.0);
        EXPECT_LT(r.best_fitness, 1.0);
    }
}

TEST(Run, ResumeFromCheckpointMatchesUninterrupted) {
    const EvolutionConfig c = tiny();
    EvolutionState full = initial_state(c);
    std::vector<nlohmann::json> checkpoints;
    EvolutionHooks hooks;
    hooks.on_checkpoint = [&](const EvolutionState& s) { checkpoints.push_back(checkpoint_to_json(c, s)); };
    run_evolution(c, full, hooks);
    ASSERT_EQ(checkpoints.size(), 1u);  // after generation 1; none after the last

    EvolutionConfig restored;
    EvolutionState resumed = checkpoint_from_json(nlohmann::json::parse(checkpoints[0].dump()), &restored);
    EXPECT_EQ(resumed.next_generation, 2);
    EXPECT_EQ(to_json(restored), to_json(c));
    run_evolution(restored, resumed);
    expect_same_records(full.records, resumed.records);
    expect_same_population(full.population, resumed.population);
    EXPECT_EQ(resumed.next_genome_id, full.next_genome_id);
}

TEST(Checkpoint, RejectsUnknownVersion) {
    const EvolutionConfig c = tiny();
    auto j = checkpoint_to_json(c, initial_state(c));
    j["format_version"] = 99;
    EXPECT_THROW(checkpoint_from_json(j), std::runtime_error);
}

TEST(Run, RejectsMismatchedPopulation) {
    const EvolutionConfig c = tiny();
    EvolutionState s = initial_state(c);
    s.population.pop_back();
    EXPECT_THROW(run_evolution(c, s), std::invalid_argument);
}
