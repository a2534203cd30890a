#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "evoforage/rng.hpp"

namespace evoforage {

inline constexpr int kGridSize = 20;
inline constexpr int kCells = kGridSize * kGridSize;
inline constexpr int kWindow = 9;
inline constexpr int kWindowRadius = kWindow / 2;
inline constexpr int kObservationSize = kWindow * kWindow * 3;  // 243
inline constexpr int kNumActions = 5;
inline constexpr int kNumBaseColors = 8;

struct CellColor {
    double r = 0.0, g = 0.0, b = 0.0;
    friend bool operator==(const CellColor&, const CellColor&) = default;
};

/// Fixed canonical base colors, in palette slot order before shuffling.
inline constexpr std::array<std::string_view, kNumBaseColors> kBaseColorNames = {
    "green", "yellow", "orange", "brown", "red", "blue", "purple", "pink"};
inline constexpr std::array<CellColor, kNumBaseColors> kBaseColors = {{
    {0.0, 0.8, 0.0},
    {1.0, 1.0, 0.0},
    {1.0, 0.6, 0.0},
    {0.55, 0.27, 0.07},
    {1.0, 0.0, 0.0},
    {0.0, 0.0, 1.0},
    {0.5, 0.0, 0.5},
    {1.0, 0.6, 0.8},
}};

/// Shuffled color assignment for one run. Slots 0..3 hold the edible color of
/// seasons 1..4, slots 4..7 the poisonous color of seasons 1..4.
struct Palette {
    std::array<std::uint8_t, kNumBaseColors> order{};

    CellColor edible(int season) const { return kBaseColors[order[season - 1]]; }
    CellColor poisonous(int season) const { return kBaseColors[order[3 + season]]; }
    bool is_edible_color(int base_index) const;
    friend bool operator==(const Palette&, const Palette&) = default;
};

enum class FoodKind : std::uint8_t { edible, poisonous };

struct Coord {
    int x = 0;  // column
    int y = 0;  // row, 0 at the top
    friend bool operator==(const Coord&, const Coord&) = default;
};

struct FoodItem {
    Coord position;
    FoodKind kind = FoodKind::edible;
    CellColor displayed_color;
    friend bool operator==(const FoodItem&, const FoodItem&) = default;
};

struct WorldConfig {
    int n_seasons = 1;
    int episode_length = 100;
    int n_edible = 10;
    int n_poisonous = 10;
    double jitter_halfwidth = 0.1;

    void validate() const;
};

enum class Action : std::uint8_t { move_up = 0, move_down = 1, move_left = 2, move_right = 3, eat = 4 };

enum class Consumed : std::uint8_t { none, edible, poisonous };

using Observation = std::array<double, kObservationSize>;

struct WorldState {
    WorldConfig config;
    Palette palette;
    Coord agent;
    std::vector<FoodItem> foods;
    std::array<std::int16_t, kCells> occupancy{};  // food index or -1
    int t = 0;
    Rng rng{0};

    int food_at(Coord c) const { return occupancy[c.y * kGridSize + c.x]; }
    int count(FoodKind kind) const;
};

struct StepOutcome {
    double reward = 0.0;
    Consumed consumed = Consumed::none;
    bool done = false;
    Observation next_observation{};
};

class EpisodeError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

Palette shuffle_palette(std::uint64_t run_seed);

/// 1-based season of step t. The first (episode_length mod n_seasons) seasons
/// are one step longer than the rest.
int season_index(int t, const WorldConfig& config);

WorldState new_episode(std::uint64_t run_seed, std::uint64_t episode_seed, const WorldConfig& config);

void observe_into(const WorldState& state, std::span<double, kObservationSize> out);
Observation observe(const WorldState& state);

StepOutcome step(WorldState& state, Action action, double per_step_energy);

enum class ActionMode : std::uint8_t { sample, greedy };

using Policy = std::function<std::array<double, kNumActions>(const Observation&)>;

struct EpisodeResult {
    double total_reward = 0.0;
    int net_energy_intake = 0;
    friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

struct TraceRow {
    int step;
    Action action;
    double reward;
    Consumed consumed;
    int season;
};

/// Picks an action from a distribution; validates it first.
Action choose_action(std::span<const double, kNumActions> probs, ActionMode mode, Rng& rng);

EpisodeResult run_episode(const Policy& policy, std::uint64_t run_seed, std::uint64_t episode_seed,
                          const WorldConfig& config, double per_step_energy, ActionMode mode,
                          std::uint64_t action_seed = 0,
                          const std::function<void(const TraceRow&)>& trace = nullptr);

}  // namespace evoforage
