#include "evoforage/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace evoforage {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::array<double, kNumActions> log_softmax(std::span<const double> logits) {
    if (logits.size() != static_cast<std::size_t>(kNumActions)) throw std::invalid_argument("expected 5 logits");
    double mx = logits[0];
    for (double z : logits) {
        if (!std::isfinite(z)) throw NumericError("non-finite logit");
        mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - mx);
    const double lse = mx + std::log(sum);
    std::array<double, kNumActions> out{};
    for (int j = 0; j < kNumActions; ++j) out[j] = logits[j] - lse;
    return out;
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

ActorCritic ActorCritic::from_genome(const Genome& g) {
    return {Phenotype::build(g, Variant::actor), Phenotype::build(g, Variant::critic)};
}

void AdamState::apply(std::span<double> params, std::span<const double> grad, double learning_rate) {
    ++step;
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * grad[i];
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
        params[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEps);
    }
}

TrainState TrainState::initial(const ActorCritic& ac) {
    TrainState s;
    s.actor_params = ac.actor.initial_params();
    s.critic_params = ac.critic.initial_params();
    s.actor_opt = AdamState(s.actor_params.size());
    s.critic_opt = AdamState(s.critic_params.size());
    return s;
}

void Trajectory::clear() {
    obs.clear();
    inputs.clear();
    actions.clear();
    log_probs.clear();
    rewards.clear();
    values.clear();
    dones.clear();
}

SeedSplit SeedSplit::derive(std::uint64_t run_seed, std::size_t n_train, std::size_t n_eval) {
    SeedSplit s;
    std::unordered_set<std::uint64_t> used;
    auto draw = [&](std::uint64_t stream, std::size_t count, std::vector<std::uint64_t>& out) {
        std::uint64_t counter = 0;
        while (out.size() < count) {
            const std::uint64_t seed = derive_seed(run_seed, {stream, counter++});
            if (used.insert(seed).second) out.push_back(seed);
        }
    };
    draw(tag("train"), n_train, s.train);
    draw(tag("eval"), n_eval, s.eval);
    return s;
}

bool SeedSplit::disjoint() const {
    std::unordered_set<std::uint64_t> t(train.begin(), train.end());
    return std::none_of(eval.begin(), eval.end(), [&](std::uint64_t e) { return t.contains(e); });
}

std::array<double, kNumActions> policy_distribution(std::span<const double> logits) {
    const auto lp = log_softmax(logits);
    std::array<double, kNumActions> p{};
    for (int j = 0; j < kNumActions; ++j) p[j] = std::exp(lp[j]);
    return p;
}

std::array<double, kNumActions> policy_distribution(const Phenotype& actor, std::span<const double> params,
                                                    std::span<const double> obs, ForwardCache& cache) {
    return policy_distribution(actor.forward(params, obs, cache));
}

Advantages compute_gae(std::span<const double> rewards, std::span<const double> values,
                       std::span<const std::uint8_t> dones, double gamma, double lambda) {
    const std::size_t n = rewards.size();
    if (values.size() != n || dones.size() != n) throw std::invalid_argument("compute_gae: length mismatch");
    Advantages out;
    out.advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    double running = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const bool terminal = dones[t] != 0 || t + 1 == n;
        const double next_value = terminal ? 0.0 : values[t + 1];
        if (terminal) running = 0.0;
        const double delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        out.advantages[t] = running;
        out.returns[t] = running + values[t];
    }
    return out;
}

Advantages compute_gae(std::span<const double> rewards, std::span<const double> values, double gamma, double lambda) {
    std::vector<std::uint8_t> dones(rewards.size(), 0);
    if (!dones.empty()) dones.back() = 1;
    return compute_gae(rewards, values, dones, gamma, lambda);
}

void normalize_advantages(std::span<double> adv) {
    if (adv.empty()) return;
    const double n = static_cast<double>(adv.size());
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::max(std::sqrt(var / n), 1e-8);
    for (double& a : adv) a = (a - mean) / sd;
}

double ppo_loss(const ActorCritic& ac, std::span<const double> actor_params, std::span<const double> critic_params,
                const Trajectory& batch, std::span<const double> advantages, std::span<const double> returns,
                std::span<const std::size_t> idx, const HyperParams& hyper, std::vector<double>* actor_grad,
                std::vector<double>* critic_grad) {
    if (idx.empty()) return 0.0;
    ForwardCache actor_cache, critic_cache;
    const double inv_n = 1.0 / static_cast<double>(idx.size());
    const double lo = 1.0 - hyper.clip_epsilon;
    const double hi = 1.0 + hyper.clip_epsilon;
    double total = 0.0;
    const bool have_sparse = batch.inputs.size() == batch.size();
    SparseInput scratch;

    for (std::size_t i : idx) {
        if (!have_sparse) scratch.assign(batch.obs[i]);
        const SparseInput& obs = have_sparse ? batch.inputs[i] : scratch;
        const int a = batch.actions[i];
        const double adv = advantages[i];

        const auto logp = log_softmax(ac.actor.forward(actor_params, obs, actor_cache));
        const double ratio = std::exp(logp[a] - batch.log_probs[i]);
        const double surr1 = ratio * adv;
        const double surr2 = std::clamp(ratio, lo, hi) * adv;
        double entropy = 0.0;
        std::array<double, kNumActions> p{};
        for (int j = 0; j < kNumActions; ++j) {
            p[j] = std::exp(logp[j]);
            entropy -= p[j] * logp[j];
        }

        const double value = ac.critic.forward(critic_params, obs, critic_cache)[0];
        const double verr = value - returns[i];
        total += -std::min(surr1, surr2) + hyper.value_coef * verr * verr - hyper.entropy_coef * entropy;

        if (actor_grad) {
            // d(-min(surr1, surr2)) / d log pi(a); zero where the clipped branch is active.
            const double g_logp = surr1 <= surr2 ? -surr1 : 0.0;
            std::array<double, kNumActions> d_logits{};
            for (int j = 0; j < kNumActions; ++j) {
                const double d_logp = (j == a ? 1.0 : 0.0) - p[j];
                d_logits[j] = (g_logp * d_logp + hyper.entropy_coef * p[j] * (logp[j] + entropy)) * inv_n;
            }
            ac.actor.backward(actor_params, obs, d_logits, actor_cache, *actor_grad);
        }
        if (critic_grad) {
            const double d_value = 2.0 * hyper.value_coef * verr * inv_n;
            ac.critic.backward(critic_params, obs, std::span<const double>(&d_value, 1), critic_cache, *critic_grad);
        }
    }
    return total * inv_n;
}

void ppo_update(const ActorCritic& ac, TrainState& state, const Trajectory& batch, const HyperParams& hyper, Rng& rng) {
    if (batch.size() == 0) throw std::invalid_argument("ppo_update: empty batch");
    auto [adv, ret] = compute_gae(batch.rewards, batch.values, batch.dones, hyper.discount_gamma, hyper.gae_lambda);
    normalize_advantages(adv);

    std::vector<std::size_t> order(batch.size());
    std::vector<double> g_actor(state.actor_params.size());
    std::vector<double> g_critic(state.critic_params.size());
    const auto mb = static_cast<std::size_t>(hyper.minibatch_size);

    for (int epoch = 0; epoch < hyper.ppo_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start < order.size(); start += mb) {
            const std::span<const std::size_t> idx(order.data() + start, std::min(mb, order.size() - start));
            std::fill(g_actor.begin(), g_actor.end(), 0.0);
            std::fill(g_critic.begin(), g_critic.end(), 0.0);
            double loss = 0.0;
            try {
                loss = ppo_loss(ac, state.actor_params, state.critic_params, batch, adv, ret, idx, hyper, &g_actor,
                                &g_critic);
            } catch (const NumericError&) {
                loss = std::numeric_limits<double>::quiet_NaN();
            }
            if (!std::isfinite(loss) || !all_finite(g_actor) || !all_finite(g_critic)) {
                ++state.nonfinite_incidents;
                continue;
            }
            state.actor_opt.apply(state.actor_params, g_actor, hyper.learning_rate);
            state.critic_opt.apply(state.critic_params, g_critic, hyper.learning_rate);
        }
    }
}

TrainState lifetime_learn(const Genome& g, const ActorCritic& ac, const LearnConfig& config,
                          std::span<const std::uint64_t> train_seeds, std::uint64_t stream_seed,
                          const std::function<void(int, double)>& on_episode) {
    TrainState state = TrainState::initial(ac);
    if (config.learn_episodes <= 0) return state;
    if (train_seeds.empty()) throw std::invalid_argument("lifetime_learn: no training seeds");

    Rng action_rng(derive_seed(stream_seed, {tag("rollout")}));
    Rng update_rng(derive_seed(stream_seed, {tag("ppo")}));
    ForwardCache actor_cache, critic_cache;
    Trajectory batch;
    batch.obs.reserve(static_cast<std::size_t>(kEpisodesPerUpdate * config.world.episode_length));

    try {
        for (int e = 0; e < config.learn_episodes; ++e) {
            WorldState world = new_episode(config.run_seed, train_seeds[static_cast<std::size_t>(e) % train_seeds.size()],
                                           config.world);
            Observation obs = observe(world);
            SparseInput input;
            input.assign(obs);
            double episode_reward = 0.0;
            bool done = false;
            while (!done) {
                const auto logp = log_softmax(ac.actor.forward(state.actor_params, input, actor_cache));
                std::array<double, kNumActions> p{};
                for (int j = 0; j < kNumActions; ++j) p[j] = std::exp(logp[j]);
                const Action a = choose_action(p, ActionMode::sample, action_rng);
                const double value = ac.critic.forward(state.critic_params, input, critic_cache)[0];
                StepOutcome o = step(world, a, config.per_step_energy);

                batch.obs.push_back(obs);
                batch.inputs.push_back(input);
                batch.actions.push_back(static_cast<int>(a));
                batch.log_probs.push_back(logp[static_cast<std::size_t>(a)]);
                batch.rewards.push_back(o.reward);
                batch.values.push_back(value);
                batch.dones.push_back(o.done ? 1 : 0);
                episode_reward += o.reward;
                obs = o.next_observation;
                input.assign(obs);
                done = o.done;
            }
            ++state.episodes;
            if (on_episode) on_episode(e, episode_reward);

            if ((e + 1) % kEpisodesPerUpdate == 0 || e + 1 == config.learn_episodes) {
                ppo_update(ac, state, batch, g.hyper, update_rng);
                batch.clear();
                if (state.nonfinite_incidents > kMaxNonfiniteIncidents) {
                    state.diverged = true;
                    break;
                }
            }
        }
    } catch (const NumericError&) {
        state.diverged = true;
    }
    return state;
}

EvalResult evaluate(const ActorCritic& ac, const TrainState& trained, const LearnConfig& config,
                    std::span<const std::uint64_t> eval_seeds, ActionMode mode, std::uint64_t stream_seed) {
    EvalResult r;
    if (eval_seeds.empty()) throw std::invalid_argument("evaluate: no evaluation seeds");
    ForwardCache cache;
    const Policy policy = [&](const Observation& obs) {
        return policy_distribution(ac.actor, trained.actor_params, obs, cache);
    };
    const std::uint64_t action_seed = derive_seed(stream_seed, {tag("eval")});
    double reward_sum = 0.0;
    double intake_sum = 0.0;
    try {
        for (std::uint64_t seed : eval_seeds) {
            const EpisodeResult ep = run_episode(policy, config.run_seed, seed, config.world, config.per_step_energy, mode,
                                                 action_seed);
            reward_sum += ep.total_reward;
            intake_sum += ep.net_energy_intake;
        }
    } catch (const NumericError&) {
        r.ok = false;
        return r;
    }
    const double n = static_cast<double>(eval_seeds.size());
    r.fitness = reward_sum / n;
    r.task_performance = intake_sum / n;
    return r;
}

}  // namespace evoforage
