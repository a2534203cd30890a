#include "evoforage/evolution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

namespace evoforage {

std::string to_string(Regime r) { return r == Regime::NEC ? "NEC" : "EC"; }

std::string to_string(FitnessMode m) {
    switch (m) {
    case FitnessMode::task: return "task";
    case FitnessMode::random: return "random";
    case FitnessMode::random_size_penalty: return "random_size_penalty";
    }
    return "task";
}

std::string to_string(ActionMode m) { return m == ActionMode::sample ? "sample" : "greedy"; }

Regime parse_regime(const std::string& s) {
    if (s == "NEC" || s == "nec") return Regime::NEC;
    if (s == "EC" || s == "ec") return Regime::EC;
    throw ConfigError("unknown regime '" + s + "' (expected NEC or EC)");
}

FitnessMode parse_fitness_mode(const std::string& s) {
    if (s == "task") return FitnessMode::task;
    if (s == "random") return FitnessMode::random;
    if (s == "random_size_penalty") return FitnessMode::random_size_penalty;
    throw ConfigError("unknown fitness mode '" + s + "'");
}

ActionMode parse_action_mode(const std::string& s) {
    if (s == "sample") return ActionMode::sample;
    if (s == "greedy") return ActionMode::greedy;
    throw ConfigError("unknown action mode '" + s + "' (expected sample or greedy)");
}

int EvolutionConfig::parent_count() const {
    return static_cast<int>(std::lround(parent_fraction * population_size));
}

WorldConfig EvolutionConfig::world_config() const {
    WorldConfig w = world;
    w.n_seasons = n_seasons;
    return w;
}

void EvolutionConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (population_size < 2) fail("population_size must be at least 2");
    if (generations < 1) fail("generations must be at least 1");
    if (elites < 0) fail("elites must be non-negative");
    if (elites >= population_size) fail("elites must be smaller than population_size");
    if (!(parent_fraction > 0.0 && parent_fraction <= 1.0)) fail("parent_fraction must be in (0, 1]");
    if (parent_count() < 1) fail("parent_fraction * population_size rounds to zero parents");
    if (elites > parent_count()) fail("elites must not exceed the parent count");
    if (n_seasons < 1 || n_seasons > 4) fail("n_seasons must be in 1..4");
    if (learn_episodes < 0) fail("learn_episodes must be non-negative");
    if (eval_episodes < 1) fail("eval_episodes must be at least 1");
    if (train_seed_count < 1) fail("train_seed_count must be at least 1");
    if (!(size_penalty_alpha >= 0.0) || !std::isfinite(size_penalty_alpha)) fail("size_penalty_alpha must be >= 0");
    if (checkpoint_interval < 0) fail("checkpoint_interval must be non-negative");
    try {
        world_config().validate();
        rates.validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
}

nlohmann::json to_json(const EvolutionConfig& c) {
    return {
        {"population_size", c.population_size},
        {"generations", c.generations},
        {"elites", c.elites},
        {"parent_fraction", c.parent_fraction},
        {"regime", to_string(c.regime)},
        {"n_seasons", c.n_seasons},
        {"fitness_mode", to_string(c.fitness_mode)},
        {"run_seed", c.run_seed},
        {"learn_episodes", c.learn_episodes},
        {"eval_episodes", c.eval_episodes},
        {"train_seed_count", c.train_seed_count},
        {"eval_mode", to_string(c.eval_mode)},
        {"size_penalty_alpha", c.size_penalty_alpha},
        {"force_learning", c.force_learning},
        {"checkpoint_interval", c.checkpoint_interval},
        {"episode_length", c.world.episode_length},
        {"n_edible", c.world.n_edible},
        {"n_poisonous", c.world.n_poisonous},
        {"jitter_halfwidth", c.world.jitter_halfwidth},
        {"mutation",
         {{"weight", c.rates.weight},
          {"node_add", c.rates.node_add},
          {"node_delete", c.rates.node_delete},
          {"conn_add", c.rates.conn_add},
          {"conn_delete", c.rates.conn_delete},
          {"hyper", c.rates.hyper}}},
    };
}

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace

EvolutionConfig evolution_config_from_json(const nlohmann::json& j, EvolutionConfig c) {
    if (!j.is_object()) throw ConfigError("evolution config must be an object");
    read_opt(j, "population_size", c.population_size);
    read_opt(j, "generations", c.generations);
    read_opt(j, "elites", c.elites);
    read_opt(j, "parent_fraction", c.parent_fraction);
    if (j.contains("regime")) c.regime = parse_regime(j.at("regime").get<std::string>());
    read_opt(j, "n_seasons", c.n_seasons);
    if (j.contains("fitness_mode")) c.fitness_mode = parse_fitness_mode(j.at("fitness_mode").get<std::string>());
    read_opt(j, "run_seed", c.run_seed);
    read_opt(j, "learn_episodes", c.learn_episodes);
    read_opt(j, "eval_episodes", c.eval_episodes);
    read_opt(j, "train_seed_count", c.train_seed_count);
    if (j.contains("eval_mode")) c.eval_mode = parse_action_mode(j.at("eval_mode").get<std::string>());
    read_opt(j, "size_penalty_alpha", c.size_penalty_alpha);
    read_opt(j, "force_learning", c.force_learning);
    read_opt(j, "checkpoint_interval", c.checkpoint_interval);
    read_opt(j, "episode_length", c.world.episode_length);
    read_opt(j, "n_edible", c.world.n_edible);
    read_opt(j, "n_poisonous", c.world.n_poisonous);
    read_opt(j, "jitter_halfwidth", c.world.jitter_halfwidth);
    if (j.contains("mutation")) {
        const auto& m = j.at("mutation");
        read_opt(m, "weight", c.rates.weight);
        read_opt(m, "node_add", c.rates.node_add);
        read_opt(m, "node_delete", c.rates.node_delete);
        read_opt(m, "conn_add", c.rates.conn_add);
        read_opt(m, "conn_delete", c.rates.conn_delete);
        read_opt(m, "hyper", c.rates.hyper);
    }
    return c;
}

double energy_rate(Regime regime, const Genome& g) {
    if (regime == Regime::NEC) return kBaseStepEnergy;
    const int n_s = ann_size(g);
    if (n_s <= 0) throw std::invalid_argument("energy_rate: genome has zero size");
    return kBaseStepEnergy * static_cast<double>(n_s) / static_cast<double>(kInitialAnnSize);
}

double random_fitness(FitnessMode mode, double u, const Genome& g, double alpha) {
    switch (mode) {
    case FitnessMode::random: return u;
    case FitnessMode::random_size_penalty:
        return u - alpha * static_cast<double>(ann_size(g)) / static_cast<double>(kInitialAnnSize);
    case FitnessMode::task: break;
    }
    throw std::invalid_argument("random_fitness: task mode has no random fitness");
}

std::vector<Individual> init_population(const EvolutionConfig& config, InnovationRegistry& registry) {
    std::vector<Individual> pop(static_cast<std::size_t>(config.population_size));
    for (std::size_t i = 0; i < pop.size(); ++i) {
        Rng rng(derive_seed(config.run_seed, {tag("init"), i}));
        pop[i].genome = initial_genome(rng, registry, i);
    }
    return pop;
}

std::vector<std::size_t> rank_population(const std::vector<Individual>& pop) {
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pop[a].fitness != pop[b].fitness) return pop[a].fitness > pop[b].fitness;
        return pop[a].genome.genome_id < pop[b].genome.genome_id;
    });
    return order;
}

Selection select_parents(const std::vector<Individual>& pop, int parent_count, int elites) {
    if (parent_count < 1 || static_cast<std::size_t>(parent_count) > pop.size())
        throw std::invalid_argument("select_parents: parent count out of range");
    if (elites < 0 || elites > parent_count) throw std::invalid_argument("select_parents: elite count out of range");
    const auto order = rank_population(pop);
    Selection s;
    s.parents.assign(order.begin(), order.begin() + parent_count);
    s.elites.assign(order.begin(), order.begin() + elites);
    return s;
}

std::vector<Genome> reproduce(const std::vector<const Genome*>& parents, int count, const MutationRates& rates,
                              Rng& rng, InnovationRegistry& registry, std::uint64_t& next_genome_id) {
    if (parents.empty()) throw std::invalid_argument("reproduce: no parents");
    std::vector<Genome> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int k = 0; k < count; ++k) {
        const std::size_t i = rng.below(parents.size());
        const std::size_t j = rng.below(parents.size());
        const Genome& fitter = *parents[std::min(i, j)];
        const Genome& other = *parents[std::max(i, j)];
        Genome child = crossover(fitter, other, rng, next_genome_id++);
        out.push_back(mutate(child, rates, rng, registry));
    }
    return out;
}

EvolutionState initial_state(const EvolutionConfig& config) {
    config.validate();
    EvolutionState s;
    s.population = init_population(config, s.registry);
    s.next_genome_id = static_cast<std::uint64_t>(config.population_size);
    return s;
}

namespace {

bool learns(const EvolutionConfig& config) {
    return config.fitness_mode == FitnessMode::task || config.force_learning;
}

void evaluate_one(Individual& ind, std::size_t index, const EvolutionConfig& config, const SeedSplit& seeds,
                  int generation) {
    const auto g = static_cast<std::uint64_t>(generation);
    const std::uint64_t stream = derive_seed(config.run_seed, {tag("individual"), g, index});
    ind.diverged = false;
    ind.task_performance = 0.0;
    if (learns(config)) {
        LearnConfig lc;
        lc.world = config.world_config();
        lc.run_seed = config.run_seed;
        lc.per_step_energy = energy_rate(config.regime, ind.genome);
        lc.learn_episodes = config.learn_episodes;
        const ActorCritic ac = ActorCritic::from_genome(ind.genome);
        const TrainState trained = lifetime_learn(ind.genome, ac, lc, seeds.train, stream);
        if (trained.diverged) {
            ind.diverged = true;
        } else {
            const EvalResult r = evaluate(ac, trained, lc, seeds.eval, config.eval_mode, stream);
            if (r.ok) {
                ind.fitness = r.fitness;
                ind.task_performance = r.task_performance;
            } else {
                ind.diverged = true;
            }
        }
    }
    if (config.fitness_mode != FitnessMode::task) {
        Rng rng(derive_seed(config.run_seed, {tag("fitness"), g, index}));
        ind.fitness = random_fitness(config.fitness_mode, rng.uniform(), ind.genome, config.size_penalty_alpha);
        ind.diverged = false;
    }
    ind.complexity = complexity_report(ind.genome, derive_seed(config.run_seed, {tag("complexity")}));
    ind.evaluated = true;
}

}  // namespace

void evaluate_population(std::vector<Individual>& pop, const EvolutionConfig& config, const SeedSplit& seeds,
                         int generation, Execution execution) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < pop.size(); ++i)
        if (!pop[i].evaluated) todo.push_back(i);

    if (execution == Execution::serial) {
        for (std::size_t i : todo) evaluate_one(pop[i], i, config, seeds, generation);
        return;
    }
    std::vector<std::exception_ptr> errors(todo.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(todo.size()); ++k) {
        const std::size_t i = todo[static_cast<std::size_t>(k)];
        try {
            evaluate_one(pop[i], i, config, seeds, generation);
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void settle_diverged(std::vector<Individual>& pop, const EvolutionConfig& config) {
    double floor = 0.0;
    bool any = false;
    for (const auto& ind : pop) {
        if (ind.diverged) continue;
        floor = any ? std::min(floor, ind.fitness) : ind.fitness;
        any = true;
    }
    if (!any) {
        // Every step poisonous plus the largest energy cost seen.
        double worst_rate = 0.0;
        for (const auto& ind : pop) worst_rate = std::min(worst_rate, energy_rate(config.regime, ind.genome));
        floor = config.world.episode_length * (worst_rate - 1.0);
    }
    for (auto& ind : pop)
        if (ind.diverged) {
            ind.fitness = floor;
            ind.task_performance = 0.0;
        }
}

void run_evolution(const EvolutionConfig& config, EvolutionState& state, const EvolutionHooks& hooks,
                   Execution execution) {
    config.validate();
    if (static_cast<int>(state.population.size()) != config.population_size)
        throw std::invalid_argument("run_evolution: population size does not match config");
    const SeedSplit seeds = SeedSplit::derive(config.run_seed, static_cast<std::size_t>(config.train_seed_count),
                                              static_cast<std::size_t>(config.eval_episodes));
    const int parents_n = config.parent_count();

    for (int g = state.next_generation; g < config.generations; ++g) {
        const auto start = std::chrono::steady_clock::now();
        evaluate_population(state.population, config, seeds, g, execution);
        settle_diverged(state.population, config);

        const auto order = rank_population(state.population);
        const Individual& best = state.population[order.front()];
        GenerationRecord rec;
        rec.run_seed = config.run_seed;
        rec.generation = g;
        rec.regime = config.regime;
        rec.n_seasons = config.n_seasons;
        rec.best_fitness = best.fitness;
        rec.best_task_performance = best.task_performance;
        rec.best_n_s = best.complexity.n_s;
        rec.best_n_c = best.complexity.n_c;
        rec.best_genome_id = best.genome.genome_id;
        double fit_sum = 0.0, size_sum = 0.0;
        for (const auto& ind : state.population) {
            fit_sum += ind.fitness;
            size_sum += ind.complexity.n_s;
            rec.n_diverged += ind.diverged ? 1 : 0;
        }
        const auto pop_n = static_cast<double>(state.population.size());
        rec.mean_fitness = fit_sum / pop_n;
        rec.mean_n_s = size_sum / pop_n;

        if (g + 1 < config.generations) {
            const Selection sel = select_parents(state.population, parents_n, config.elites);
            std::vector<const Genome*> parents;
            for (std::size_t i : sel.parents) parents.push_back(&state.population[i].genome);
            Rng rng(derive_seed(config.run_seed, {tag("reproduce"), static_cast<std::uint64_t>(g)}));
            auto offspring = reproduce(parents, config.population_size - config.elites, config.rates, rng,
                                       state.registry, state.next_genome_id);
            std::vector<Individual> next;
            next.reserve(state.population.size());
            for (std::size_t i : sel.elites) next.push_back(state.population[i]);
            for (auto& child : offspring) {
                Individual ind;
                ind.genome = std::move(child);
                next.push_back(std::move(ind));
            }
            rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (hooks.on_generation) hooks.on_generation(rec, best);
            state.records.push_back(rec);
            state.population = std::move(next);
        } else {
            rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (hooks.on_generation) hooks.on_generation(rec, best);
            state.records.push_back(rec);
        }
        state.next_generation = g + 1;
        if (hooks.on_checkpoint && config.checkpoint_interval > 0 && (g + 1) % config.checkpoint_interval == 0 &&
            g + 1 < config.generations)
            hooks.on_checkpoint(state);
    }
}

namespace {

nlohmann::json record_to_json(const GenerationRecord& r) {
    return {{"run_seed", r.run_seed},
            {"generation", r.generation},
            {"regime", to_string(r.regime)},
            {"n_seasons", r.n_seasons},
            {"best_fitness", hex_double(r.best_fitness)},
            {"best_task_performance", hex_double(r.best_task_performance)},
            {"best_n_s", r.best_n_s},
            {"best_n_c", hex_double(r.best_n_c)},
            {"mean_fitness", hex_double(r.mean_fitness)},
            {"mean_n_s", hex_double(r.mean_n_s)},
            {"best_genome_id", r.best_genome_id},
            {"n_diverged", r.n_diverged},
            {"wall_time", r.wall_time}};
}

GenerationRecord record_from_json(const nlohmann::json& j) {
    GenerationRecord r;
    r.run_seed = j.at("run_seed").get<std::uint64_t>();
    r.generation = j.at("generation").get<int>();
    r.regime = parse_regime(j.at("regime").get<std::string>());
    r.n_seasons = j.at("n_seasons").get<int>();
    r.best_fitness = parse_hex_double(j.at("best_fitness").get<std::string>());
    r.best_task_performance = parse_hex_double(j.at("best_task_performance").get<std::string>());
    r.best_n_s = j.at("best_n_s").get<int>();
    r.best_n_c = parse_hex_double(j.at("best_n_c").get<std::string>());
    r.mean_fitness = parse_hex_double(j.at("mean_fitness").get<std::string>());
    r.mean_n_s = parse_hex_double(j.at("mean_n_s").get<std::string>());
    r.best_genome_id = j.at("best_genome_id").get<std::uint64_t>();
    r.n_diverged = j.at("n_diverged").get<int>();
    r.wall_time = j.at("wall_time").get<double>();
    return r;
}

nlohmann::json individual_to_json(const Individual& ind) {
    return {{"genome", to_json(ind.genome)},
            {"fitness", hex_double(ind.fitness)},
            {"task_performance", hex_double(ind.task_performance)},
            {"evaluated", ind.evaluated},
            {"diverged", ind.diverged},
            {"complexity",
             {{"n_s", ind.complexity.n_s},
              {"modularity", hex_double(ind.complexity.modularity)},
              {"efficiency", hex_double(ind.complexity.efficiency)},
              {"n_c", hex_double(ind.complexity.n_c)}}}};
}

Individual individual_from_json(const nlohmann::json& j) {
    Individual ind;
    ind.genome = genome_from_json(j.at("genome"));
    ind.fitness = parse_hex_double(j.at("fitness").get<std::string>());
    ind.task_performance = parse_hex_double(j.at("task_performance").get<std::string>());
    ind.evaluated = j.at("evaluated").get<bool>();
    ind.diverged = j.at("diverged").get<bool>();
    const auto& c = j.at("complexity");
    ind.complexity.n_s = c.at("n_s").get<int>();
    ind.complexity.modularity = parse_hex_double(c.at("modularity").get<std::string>());
    ind.complexity.efficiency = parse_hex_double(c.at("efficiency").get<std::string>());
    ind.complexity.n_c = parse_hex_double(c.at("n_c").get<std::string>());
    return ind;
}

}  // namespace

nlohmann::json checkpoint_to_json(const EvolutionConfig& config, const EvolutionState& state) {
    nlohmann::json pop = nlohmann::json::array();
    for (const auto& ind : state.population) pop.push_back(individual_to_json(ind));
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : state.records) recs.push_back(record_to_json(r));
    return {{"format_version", kCheckpointFormatVersion},
            {"config", to_json(config)},
            {"next_generation", state.next_generation},
            {"next_genome_id", state.next_genome_id},
            {"registry", state.registry.to_json()},
            {"population", std::move(pop)},
            {"records", std::move(recs)}};
}

EvolutionState checkpoint_from_json(const nlohmann::json& j, EvolutionConfig* config) {
    if (j.value("format_version", -1) != kCheckpointFormatVersion)
        throw std::runtime_error("checkpoint: unsupported format_version");
    if (config) *config = evolution_config_from_json(j.at("config"));
    EvolutionState s;
    s.next_generation = j.at("next_generation").get<int>();
    s.next_genome_id = j.at("next_genome_id").get<std::uint64_t>();
    s.registry = InnovationRegistry::from_json(j.at("registry"));
    for (const auto& ind : j.at("population")) s.population.push_back(individual_from_json(ind));
    for (const auto& r : j.at("records")) s.records.push_back(record_from_json(r));
    return s;
}

}  // namespace evoforage
