#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evoforage/complexity.hpp"
#include "evoforage/genome.hpp"
#include "evoforage/gridworld.hpp"
#include "evoforage/learner.hpp"

namespace evoforage {

enum class Regime { NEC, EC };
enum class FitnessMode { task, random, random_size_penalty };

std::string to_string(Regime r);
std::string to_string(FitnessMode m);
std::string to_string(ActionMode m);
Regime parse_regime(const std::string& s);
FitnessMode parse_fitness_mode(const std::string& s);
ActionMode parse_action_mode(const std::string& s);

inline constexpr double kBaseStepEnergy = -0.01;

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct EvolutionConfig {
    int population_size = 150;
    int generations = 400;
    int elites = 2;
    double parent_fraction = 0.10;
    Regime regime = Regime::NEC;
    int n_seasons = 1;
    FitnessMode fitness_mode = FitnessMode::task;
    std::uint64_t run_seed = 0;

    int learn_episodes = 1000;
    int eval_episodes = 100;
    int train_seed_count = 1000;
    ActionMode eval_mode = ActionMode::sample;
    double size_penalty_alpha = 0.5;
    /// Random fitness modes normally skip learning; this runs it anyway.
    bool force_learning = false;
    int checkpoint_interval = 25;

    WorldConfig world;  // n_seasons is taken from the field above
    MutationRates rates;

    int parent_count() const;
    WorldConfig world_config() const;
    /// Throws ConfigError.
    void validate() const;
};

nlohmann::json to_json(const EvolutionConfig& c);
/// Missing keys keep the values already in `base`.
EvolutionConfig evolution_config_from_json(const nlohmann::json& j, EvolutionConfig base = {});

struct Individual {
    Genome genome;
    double fitness = 0.0;
    double task_performance = 0.0;
    ComplexityReport complexity;
    bool evaluated = false;
    bool diverged = false;
};

struct GenerationRecord {
    std::uint64_t run_seed = 0;
    int generation = 0;
    Regime regime = Regime::NEC;
    int n_seasons = 1;
    double best_fitness = 0.0;
    double best_task_performance = 0.0;
    int best_n_s = 0;
    double best_n_c = 0.0;
    double mean_fitness = 0.0;
    double mean_n_s = 0.0;
    std::uint64_t best_genome_id = 0;
    int n_diverged = 0;
    double wall_time = 0.0;  // seconds; excluded from byte-compared outputs
};

/// Per-step energy: NEC -0.01; EC -0.01 * N_S / 254.
double energy_rate(Regime regime, const Genome& g);

/// Fitness under a random mode from the draw `u` ~ U(0,1).
double random_fitness(FitnessMode mode, double u, const Genome& g, double alpha);

std::vector<Individual> init_population(const EvolutionConfig& config, InnovationRegistry& registry);

/// Indices sorted fittest first; ties go to the lower genome_id.
std::vector<std::size_t> rank_population(const std::vector<Individual>& pop);

struct Selection {
    std::vector<std::size_t> parents;  // fittest first
    std::vector<std::size_t> elites;
};
Selection select_parents(const std::vector<Individual>& pop, int parent_count, int elites);

/// `parents` are ordered fittest first. Pairs are drawn uniformly with
/// replacement; the fitter of the two is passed first to crossover.
std::vector<Genome> reproduce(const std::vector<const Genome*>& parents, int count, const MutationRates& rates,
                              Rng& rng, InnovationRegistry& registry, std::uint64_t& next_genome_id);

/// Everything needed to continue a run bit-exactly.
struct EvolutionState {
    int next_generation = 0;
    std::uint64_t next_genome_id = 0;
    InnovationRegistry registry;
    std::vector<Individual> population;
    std::vector<GenerationRecord> records;
};

EvolutionState initial_state(const EvolutionConfig& config);

enum class Execution { parallel, serial };

/// Learns (unless skipped) and evaluates every individual with
/// evaluated == false, then computes its complexity. Individual i of
/// generation g draws only from streams derived from (run_seed, g, i).
void evaluate_population(std::vector<Individual>& pop, const EvolutionConfig& config, const SeedSplit& seeds,
                         int generation, Execution execution = Execution::parallel);

/// Diverged individuals receive the minimum fitness of the generation.
void settle_diverged(std::vector<Individual>& pop, const EvolutionConfig& config);

struct EvolutionHooks {
    std::function<void(const GenerationRecord&, const Individual& best)> on_generation;
    std::function<void(const EvolutionState&)> on_checkpoint;
};

/// Runs generations state.next_generation .. config.generations-1.
void run_evolution(const EvolutionConfig& config, EvolutionState& state, const EvolutionHooks& hooks = {},
                   Execution execution = Execution::parallel);

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json checkpoint_to_json(const EvolutionConfig& config, const EvolutionState& state);
EvolutionState checkpoint_from_json(const nlohmann::json& j, EvolutionConfig* config = nullptr);

}  // namespace evoforage
