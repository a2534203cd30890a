#include "evoforage/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace evoforage {

namespace {

CellColor jitter(CellColor base, double halfwidth, Rng& rng) {
    auto channel = [&](double v) { return std::clamp(v + rng.uniform(-halfwidth, halfwidth), 0.0, 1.0); };
    // Evaluation order of the three draws is fixed (r, g, b).
    CellColor c;
    c.r = channel(base.r);
    c.g = channel(base.g);
    c.b = channel(base.b);
    return c;
}

CellColor base_color(const Palette& palette, FoodKind kind, int season) {
    return kind == FoodKind::edible ? palette.edible(season) : palette.poisonous(season);
}

int cell_index(Coord c) { return c.y * kGridSize + c.x; }

Coord cell_coord(int index) { return {index % kGridSize, index / kGridSize}; }

void recolor_all(WorldState& s, int season) {
    for (auto& food : s.foods)
        food.displayed_color = jitter(base_color(s.palette, food.kind, season), s.config.jitter_halfwidth, s.rng);
}

}  // namespace

bool Palette::is_edible_color(int base_index) const {
    for (int i = 0; i < 4; ++i)
        if (order[i] == base_index) return true;
    return false;
}

void WorldConfig::validate() const {
    if (n_seasons < 1 || n_seasons > 4) throw std::invalid_argument("n_seasons must be in 1..4");
    if (episode_length < n_seasons) throw std::invalid_argument("episode_length shorter than season count");
    if (n_edible < 0 || n_poisonous < 0 || n_edible + n_poisonous > kCells)
        throw std::invalid_argument("food counts do not fit on the grid");
    if (!(jitter_halfwidth >= 0.0)) throw std::invalid_argument("jitter_halfwidth must be non-negative");
}

int WorldState::count(FoodKind kind) const {
    return static_cast<int>(std::count_if(foods.begin(), foods.end(), [&](const FoodItem& f) { return f.kind == kind; }));
}

Palette shuffle_palette(std::uint64_t run_seed) {
    Palette p;
    std::iota(p.order.begin(), p.order.end(), std::uint8_t{0});
    Rng rng(derive_seed(run_seed, {tag("palette")}));
    rng.shuffle(p.order.begin(), p.order.end());
    return p;
}

int season_index(int t, const WorldConfig& config) {
    if (t < 0 || t >= config.episode_length)
        throw std::out_of_range("season_index: t=" + std::to_string(t) + " outside episode");
    const int n = config.n_seasons;
    const int base = config.episode_length / n;
    const int longer = config.episode_length % n;
    const int boundary = longer * (base + 1);
    if (t < boundary) return t / (base + 1) + 1;
    return longer + (t - boundary) / base + 1;
}

WorldState new_episode(std::uint64_t run_seed, std::uint64_t episode_seed, const WorldConfig& config) {
    config.validate();
    WorldState s;
    s.config = config;
    s.palette = shuffle_palette(run_seed);
    s.rng = Rng(derive_seed(run_seed, {tag("episode"), episode_seed}));
    s.occupancy.fill(-1);

    const int n_food = config.n_edible + config.n_poisonous;
    std::array<int, kCells> cells{};
    std::iota(cells.begin(), cells.end(), 0);
    // Partial Fisher-Yates: the first n_food entries become the food cells.
    for (int i = 0; i < n_food; ++i) {
        const auto j = i + static_cast<int>(s.rng.below(static_cast<std::uint64_t>(kCells - i)));
        std::swap(cells[i], cells[j]);
    }
    s.foods.reserve(static_cast<std::size_t>(n_food));
    for (int i = 0; i < n_food; ++i) {
        FoodItem f;
        f.position = cell_coord(cells[i]);
        f.kind = i < config.n_edible ? FoodKind::edible : FoodKind::poisonous;
        s.occupancy[cells[i]] = static_cast<std::int16_t>(i);
        s.foods.push_back(f);
    }
    s.agent = cell_coord(static_cast<int>(s.rng.below(kCells)));
    recolor_all(s, season_index(0, config));
    return s;
}

void observe_into(const WorldState& state, std::span<double, kObservationSize> out) {
    std::size_t k = 0;
    for (int dy = -kWindowRadius; dy <= kWindowRadius; ++dy) {
        for (int dx = -kWindowRadius; dx <= kWindowRadius; ++dx, k += 3) {
            const int x = state.agent.x + dx;
            const int y = state.agent.y + dy;
            if (x < 0 || y < 0 || x >= kGridSize || y >= kGridSize) {
                out[k] = out[k + 1] = out[k + 2] = 0.0;
                continue;
            }
            const int idx = state.occupancy[y * kGridSize + x];
            if (idx < 0) {
                out[k] = out[k + 1] = out[k + 2] = 0.0;
                continue;
            }
            const CellColor& c = state.foods[static_cast<std::size_t>(idx)].displayed_color;
            out[k] = c.r;
            out[k + 1] = c.g;
            out[k + 2] = c.b;
        }
    }
}

Observation observe(const WorldState& state) {
    Observation obs;
    observe_into(state, obs);
    return obs;
}

StepOutcome step(WorldState& s, Action action, double per_step_energy) {
    if (s.t >= s.config.episode_length) throw EpisodeError("step called on a finished episode");
    StepOutcome out;
    const int season = season_index(s.t, s.config);

    switch (action) {
        case Action::move_up: s.agent.y = std::max(0, s.agent.y - 1); break;
        case Action::move_down: s.agent.y = std::min(kGridSize - 1, s.agent.y + 1); break;
        case Action::move_left: s.agent.x = std::max(0, s.agent.x - 1); break;
        case Action::move_right: s.agent.x = std::min(kGridSize - 1, s.agent.x + 1); break;
        case Action::eat: {
            const int here = cell_index(s.agent);
            const int idx = s.occupancy[here];
            if (idx < 0) break;
            FoodItem& food = s.foods[static_cast<std::size_t>(idx)];
            if (food.kind == FoodKind::edible) {
                out.reward += 1.0;
                out.consumed = Consumed::edible;
            } else {
                out.reward -= 1.0;
                out.consumed = Consumed::poisonous;
            }
            s.occupancy[here] = -1;
            // Replacement: uniform over cells holding no food (the agent's cell included).
            const int free_cells = kCells - static_cast<int>(s.foods.size()) + 1;
            int pick = static_cast<int>(s.rng.below(static_cast<std::uint64_t>(free_cells)));
            int target = -1;
            for (int c = 0; c < kCells; ++c) {
                if (s.occupancy[c] >= 0) continue;
                if (pick-- == 0) {
                    target = c;
                    break;
                }
            }
            food.position = cell_coord(target);
            food.displayed_color = jitter(base_color(s.palette, food.kind, season), s.config.jitter_halfwidth, s.rng);
            s.occupancy[target] = static_cast<std::int16_t>(idx);
            break;
        }
        default: throw std::invalid_argument("invalid action index");
    }

    out.reward += per_step_energy;
    ++s.t;
    out.done = s.t == s.config.episode_length;
    if (!out.done) {
        const int next_season = season_index(s.t, s.config);
        if (next_season != season) recolor_all(s, next_season);
    }
    observe_into(s, out.next_observation);
    return out;
}

Action choose_action(std::span<const double, kNumActions> probs, ActionMode mode, Rng& rng) {
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw std::invalid_argument("policy produced a negative or NaN probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("policy distribution does not sum to 1");

    if (mode == ActionMode::greedy) {
        const auto it = std::max_element(probs.begin(), probs.end());
        return static_cast<Action>(it - probs.begin());
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
        acc += probs[static_cast<std::size_t>(a)];
        if (u < acc) return static_cast<Action>(a);
    }
    // Rounding left u beyond the last partial sum; take the last action with mass.
    for (int a = kNumActions - 1; a >= 0; --a)
        if (probs[static_cast<std::size_t>(a)] > 0.0) return static_cast<Action>(a);
    return Action::eat;
}

EpisodeResult run_episode(const Policy& policy, std::uint64_t run_seed, std::uint64_t episode_seed,
                          const WorldConfig& config, double per_step_energy, ActionMode mode,
                          std::uint64_t action_seed, const std::function<void(const TraceRow&)>& trace) {
    WorldState s = new_episode(run_seed, episode_seed, config);
    Rng action_rng(derive_seed(action_seed, {tag("action"), episode_seed}));
    EpisodeResult result;
    Observation obs = observe(s);
    bool done = false;
    while (!done) {
        const auto probs = policy(obs);
        const Action a = choose_action(probs, mode, action_rng);
        const int season = season_index(s.t, s.config);
        StepOutcome o = step(s, a, per_step_energy);
        result.total_reward += o.reward;
        if (o.consumed == Consumed::edible) ++result.net_energy_intake;
        if (o.consumed == Consumed::poisonous) --result.net_energy_intake;
        if (trace) trace({s.t - 1, a, o.reward, o.consumed, season});
        obs = o.next_observation;
        done = o.done;
    }
    return result;
}

}  // namespace evoforage
