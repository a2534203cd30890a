#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evoforage/genome.hpp"
#include "evoforage/gridworld.hpp"
#include "evoforage/phenotype.hpp"

namespace evoforage {

/// Actor and critic compiled from the same genome.
struct ActorCritic {
    Phenotype actor;
    Phenotype critic;

    static ActorCritic from_genome(const Genome& g);
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
    void apply(std::span<double> params, std::span<const double> grad, double learning_rate);
};

struct TrainState {
    std::vector<double> actor_params;
    std::vector<double> critic_params;
    AdamState actor_opt;
    AdamState critic_opt;
    int episodes = 0;
    int nonfinite_incidents = 0;
    bool diverged = false;

    static TrainState initial(const ActorCritic& ac);
};

/// Rollout storage. One entry per environment step.
struct Trajectory {
    std::vector<Observation> obs;
    std::vector<SparseInput> inputs;  // optional sparse copy of obs
    std::vector<int> actions;
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<std::uint8_t> dones;

    std::size_t size() const { return actions.size(); }
    void clear();
};

/// Fixed per-run episode seeds: training and evaluation sets are disjoint.
struct SeedSplit {
    std::vector<std::uint64_t> train;
    std::vector<std::uint64_t> eval;

    static SeedSplit derive(std::uint64_t run_seed, std::size_t n_train = 1000, std::size_t n_eval = 100);
    bool disjoint() const;
};

/// Above this many skipped minibatches an individual counts as diverged.
inline constexpr int kMaxNonfiniteIncidents = 100;
inline constexpr int kEpisodesPerUpdate = 10;

std::array<double, kNumActions> policy_distribution(std::span<const double> logits);
std::array<double, kNumActions> policy_distribution(const Phenotype& actor, std::span<const double> params,
                                                    std::span<const double> obs, ForwardCache& cache);

struct Advantages {
    std::vector<double> advantages;
    std::vector<double> returns;
};

/// GAE over a sequence of steps; `dones[t]` marks the last step of an episode
/// (bootstrap value 0 after it). The final step is always treated as terminal.
Advantages compute_gae(std::span<const double> rewards, std::span<const double> values,
                       std::span<const std::uint8_t> dones, double gamma, double lambda);
Advantages compute_gae(std::span<const double> rewards, std::span<const double> values, double gamma, double lambda);

/// Zero mean, unit (population) std with a 1e-8 floor.
void normalize_advantages(std::span<double> adv);

/// Clipped-surrogate PPO loss averaged over the samples in `idx`:
///   -min(rA, clip(r)A) + value_coef (V - R)^2 - entropy_coef H.
/// If gradient buffers are given (sized to the parameter vectors) the
/// gradient is accumulated into them.
double ppo_loss(const ActorCritic& ac, std::span<const double> actor_params, std::span<const double> critic_params,
                const Trajectory& batch, std::span<const double> advantages, std::span<const double> returns,
                std::span<const std::size_t> idx, const HyperParams& hyper, std::vector<double>* actor_grad,
                std::vector<double>* critic_grad);

/// Runs hyper.ppo_epochs epochs of shuffled minibatch updates.
void ppo_update(const ActorCritic& ac, TrainState& state, const Trajectory& batch, const HyperParams& hyper, Rng& rng);

struct LearnConfig {
    WorldConfig world;
    std::uint64_t run_seed = 0;
    double per_step_energy = -0.01;
    int learn_episodes = 1000;
};

/// Baldwinian lifetime learning: trains a copy of the inherited weights; the
/// genome is never modified. `stream_seed` names this individual's random
/// streams. `on_episode(index, total_reward)` is an optional debugging hook.
TrainState lifetime_learn(const Genome& g, const ActorCritic& ac, const LearnConfig& config,
                          std::span<const std::uint64_t> train_seeds, std::uint64_t stream_seed,
                          const std::function<void(int, double)>& on_episode = nullptr);

struct EvalResult {
    double fitness = 0.0;           // mean total reward
    double task_performance = 0.0;  // mean net energy intake
    bool ok = true;                 // false if the network produced non-finite values
};

EvalResult evaluate(const ActorCritic& ac, const TrainState& trained, const LearnConfig& config,
                    std::span<const std::uint64_t> eval_seeds, ActionMode mode, std::uint64_t stream_seed);

}  // namespace evoforage
