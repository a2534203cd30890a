#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <set>

#include "evoforage/gridworld.hpp"

using namespace evoforage;

namespace {

// Window index of the cell at offset (dx, dy) from the agent.
std::size_t window_slot(int dx, int dy) {
    return static_cast<std::size_t>(((dy + kWindowRadius) * kWindow + (dx + kWindowRadius)) * 3);
}

WorldState empty_world(Coord agent) {
    WorldState s;
    s.config = WorldConfig{};
    s.palette = shuffle_palette(1);
    s.agent = agent;
    s.occupancy.fill(-1);
    return s;
}

void place(WorldState& s, Coord c, FoodKind kind, CellColor color) {
    s.occupancy[c.y * kGridSize + c.x] = static_cast<std::int16_t>(s.foods.size());
    s.foods.push_back({c, kind, color});
}

CellColor expected_base(const WorldState& s, const FoodItem& f, int season) {
    return f.kind == FoodKind::edible ? s.palette.edible(season) : s.palette.poisonous(season);
}

bool within_band(double shown, double base, double halfwidth) {
    const double lo = std::max(0.0, base - halfwidth);
    const double hi = std::min(1.0, base + halfwidth);
    return shown >= lo && shown <= hi;
}

}  // namespace

TEST(Palette, IsPermutationWithFourEdible) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Palette p = shuffle_palette(seed);
        std::set<int> seen(p.order.begin(), p.order.end());
        ASSERT_EQ(seen.size(), 8u);
        int edible = 0;
        for (int c = 0; c < kNumBaseColors; ++c) edible += p.is_edible_color(c);
        ASSERT_EQ(edible, 4);
        for (int s = 1; s <= 4; ++s) ASSERT_NE(p.edible(s), p.poisonous(s));
    }
    EXPECT_EQ(shuffle_palette(17), shuffle_palette(17));
}

TEST(Palette, EachColorEdibleHalfTheTime) {
    std::array<int, kNumBaseColors> edible{};
    const int n = 1000;
    for (int seed = 0; seed < n; ++seed) {
        const Palette p = shuffle_palette(static_cast<std::uint64_t>(seed));
        for (int c = 0; c < kNumBaseColors; ++c) edible[c] += p.is_edible_color(c);
    }
    for (int c = 0; c < kNumBaseColors; ++c) EXPECT_NEAR(edible[c] / double(n), 0.5, 0.05) << kBaseColorNames[c];
}

TEST(BaseColors, ChannelsInUnitRangeAndNoBlack) {
    for (const auto& c : kBaseColors) {
        for (double v : {c.r, c.g, c.b}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_GT(c.r + c.g + c.b, 0.0);
    }
}

TEST(Season, TwoSeasonsSplitAtFifty) {
    WorldConfig c;
    c.n_seasons = 2;
    EXPECT_EQ(season_index(49, c), 1);
    EXPECT_EQ(season_index(50, c), 2);
    c.n_seasons = 1;
    for (int t = 0; t < 100; ++t) EXPECT_EQ(season_index(t, c), 1);
}

TEST(Season, RemainderGoesToLeadingSeasons) {
    WorldConfig c;
    c.n_seasons = 3;
    EXPECT_EQ(season_index(33, c), 1);
    EXPECT_EQ(season_index(34, c), 2);
    EXPECT_EQ(season_index(67, c), 3);
    std::array<int, 4> len{};
    for (int t = 0; t < 100; ++t) ++len[season_index(t, c)];
    EXPECT_EQ(len[1], 34);
    EXPECT_EQ(len[2], 33);
    EXPECT_EQ(len[3], 33);
}

TEST(Season, ContiguousBlocksDifferingByAtMostOne) {
    for (int n = 1; n <= 4; ++n) {
        for (int length : {4, 7, 50, 99, 100, 101}) {
            WorldConfig c;
            c.n_seasons = n;
            c.episode_length = length;
            std::array<int, 5> len{};
            int prev = 1;
            for (int t = 0; t < length; ++t) {
                const int s = season_index(t, c);
                ASSERT_GE(s, prev);
                ASSERT_LE(s - prev, 1);
                prev = s;
                ++len[s];
            }
            EXPECT_EQ(prev, n);
            int lo = length, hi = 0;
            for (int s = 1; s <= n; ++s) {
                lo = std::min(lo, len[s]);
                hi = std::max(hi, len[s]);
            }
            EXPECT_LE(hi - lo, 1);
        }
    }
}

TEST(Season, OutOfRangeThrows) {
    WorldConfig c;
    EXPECT_THROW(season_index(-1, c), std::out_of_range);
    EXPECT_THROW(season_index(100, c), std::out_of_range);
}

TEST(Episode, CountsAndDistinctPositions) {
    WorldConfig c;
    c.n_seasons = 2;
    for (std::uint64_t e = 0; e < 1000; ++e) {
        const WorldState s = new_episode(3, e, c);
        ASSERT_EQ(s.count(FoodKind::edible), 10);
        ASSERT_EQ(s.count(FoodKind::poisonous), 10);
        std::set<std::pair<int, int>> cells;
        for (const auto& f : s.foods) cells.insert({f.position.x, f.position.y});
        ASSERT_EQ(cells.size(), 20u);
        ASSERT_GE(s.agent.x, 0);
        ASSERT_LT(s.agent.x, kGridSize);
        ASSERT_GE(s.agent.y, 0);
        ASSERT_LT(s.agent.y, kGridSize);
    }
}

TEST(Episode, Deterministic) {
    WorldConfig c;
    const WorldState a = new_episode(11, 22, c);
    const WorldState b = new_episode(11, 22, c);
    EXPECT_EQ(a.agent, b.agent);
    EXPECT_EQ(a.foods, b.foods);
    EXPECT_EQ(a.palette, b.palette);
    const WorldState d = new_episode(11, 23, c);
    EXPECT_FALSE(a.foods == d.foods && a.agent == d.agent);
}

TEST(Observe, EmptyWindowIsAllZero) {
    const WorldState s = empty_world({10, 10});
    const Observation o = observe(s);
    for (double v : o) EXPECT_EQ(v, 0.0);
}

TEST(Observe, CornerPaddingMatchesBruteForce) {
    WorldState s = empty_world({0, 0});
    // Fill every in-bounds cell of the window with food so padding is the only zero.
    const CellColor col{0.3, 0.4, 0.5};
    for (int y = 0; y <= kWindowRadius; ++y)
        for (int x = 0; x <= kWindowRadius; ++x) place(s, {x, y}, FoodKind::edible, col);
    const Observation o = observe(s);
    int padded = 0;
    for (int dy = -kWindowRadius; dy <= kWindowRadius; ++dy) {
        for (int dx = -kWindowRadius; dx <= kWindowRadius; ++dx) {
            const std::size_t k = window_slot(dx, dy);
            const bool outside = dx < 0 || dy < 0;
            if (outside) {
                ++padded;
                EXPECT_EQ(o[k] + o[k + 1] + o[k + 2], 0.0);
            } else {
                EXPECT_EQ(o[k], col.r);
                EXPECT_EQ(o[k + 1], col.g);
                EXPECT_EQ(o[k + 2], col.b);
            }
        }
    }
    EXPECT_EQ(padded, 4 * 9 + 9 * 4 - 4 * 4);
    EXPECT_EQ(padded, 81 - 25);
}

TEST(Observe, FoodTwoCellsRight) {
    WorldState s = empty_world({5, 5});
    place(s, {7, 5}, FoodKind::poisonous, {0.9, 0.1, 0.1});
    const Observation o = observe(s);
    const std::size_t k = window_slot(2, 0);
    EXPECT_EQ(o[k], 0.9);
    EXPECT_EQ(o[k + 1], 0.1);
    EXPECT_EQ(o[k + 2], 0.1);
    double total = 0.0;
    for (double v : o) total += v;
    EXPECT_DOUBLE_EQ(total, 1.1);
}

TEST(Step, EatEdibleRewardsAndRespawns) {
    WorldConfig c;
    WorldState s = new_episode(1, 1, c);
    // Move the agent onto an edible item.
    for (const auto& f : s.foods)
        if (f.kind == FoodKind::edible) {
            s.agent = f.position;
            break;
        }
    const StepOutcome o = step(s, Action::eat, -0.01);
    EXPECT_DOUBLE_EQ(o.reward, 0.99);
    EXPECT_EQ(o.consumed, Consumed::edible);
    EXPECT_EQ(s.count(FoodKind::edible), 10);
    EXPECT_EQ(s.count(FoodKind::poisonous), 10);
    EXPECT_EQ(s.t, 1);
}

TEST(Step, EatPoisonCostsOne) {
    WorldConfig c;
    WorldState s = new_episode(1, 2, c);
    for (const auto& f : s.foods)
        if (f.kind == FoodKind::poisonous) {
            s.agent = f.position;
            break;
        }
    const StepOutcome o = step(s, Action::eat, -0.01);
    EXPECT_DOUBLE_EQ(o.reward, -1.01);
    EXPECT_EQ(o.consumed, Consumed::poisonous);
}

TEST(Step, WallBlocksAndEmptyEat) {
    WorldState s = empty_world({3, 0});
    const StepOutcome up = step(s, Action::move_up, -0.01);
    EXPECT_EQ(s.agent, (Coord{3, 0}));
    EXPECT_EQ(up.reward, -0.01);
    EXPECT_EQ(up.consumed, Consumed::none);
    const StepOutcome eat = step(s, Action::eat, -0.01);
    EXPECT_EQ(eat.reward, -0.01);
    EXPECT_EQ(eat.consumed, Consumed::none);
    step(s, Action::move_right, -0.01);
    step(s, Action::move_down, -0.01);
    EXPECT_EQ(s.agent, (Coord{4, 1}));
    s.agent = {0, kGridSize - 1};
    step(s, Action::move_left, -0.01);
    step(s, Action::move_down, -0.01);
    EXPECT_EQ(s.agent, (Coord{0, kGridSize - 1}));
}

TEST(Step, DoneExactlyAtEpisodeLengthThenThrows) {
    WorldConfig c;
    WorldState s = new_episode(2, 2, c);
    for (int t = 0; t < c.episode_length; ++t) {
        const StepOutcome o = step(s, Action::move_left, -0.01);
        ASSERT_EQ(o.done, t == c.episode_length - 1);
    }
    EXPECT_THROW(step(s, Action::eat, -0.01), EpisodeError);
}

// Food conservation, observation bounds and jitter band along random trajectories.
TEST(Step, InvariantsAlongRandomTrajectories) {
    for (int n_seasons = 1; n_seasons <= 4; ++n_seasons) {
        WorldConfig c;
        c.n_seasons = n_seasons;
        Rng pick(static_cast<std::uint64_t>(n_seasons));
        for (std::uint64_t e = 0; e < 20; ++e) {
            WorldState s = new_episode(100 + e, e, c);
            while (s.t < c.episode_length) {
                // Bias toward eating so replacements happen often.
                const auto a = static_cast<Action>(pick.below(3) == 0 ? 4 : pick.below(4));
                if (a == Action::eat && s.food_at(s.agent) < 0 && !s.foods.empty())
                    s.agent = s.foods[pick.below(s.foods.size())].position;
                const StepOutcome o = step(s, a, -0.01);
                ASSERT_EQ(s.count(FoodKind::edible), 10);
                ASSERT_EQ(s.count(FoodKind::poisonous), 10);
                for (double v : o.next_observation) {
                    ASSERT_GE(v, 0.0);
                    ASSERT_LE(v, 1.0);
                }
                if (o.done) break;
                const int season = season_index(s.t, c);
                for (const auto& f : s.foods) {
                    const CellColor b = expected_base(s, f, season);
                    ASSERT_TRUE(within_band(f.displayed_color.r, b.r, c.jitter_halfwidth));
                    ASSERT_TRUE(within_band(f.displayed_color.g, b.g, c.jitter_halfwidth));
                    ASSERT_TRUE(within_band(f.displayed_color.b, b.b, c.jitter_halfwidth));
                    ASSERT_EQ(s.food_at(f.position), &f - s.foods.data());
                }
            }
        }
    }
}

TEST(ChooseAction, ValidatesDistribution) {
    Rng r(1);
    const std::array<double, 5> bad_sum{0.5, 0.5, 0.5, 0.0, 0.0};
    const std::array<double, 5> negative{1.2, -0.2, 0.0, 0.0, 0.0};
    EXPECT_THROW(choose_action(bad_sum, ActionMode::sample, r), std::invalid_argument);
    EXPECT_THROW(choose_action(negative, ActionMode::sample, r), std::invalid_argument);
    const std::array<double, 5> p{0.1, 0.1, 0.6, 0.1, 0.1};
    EXPECT_EQ(choose_action(p, ActionMode::greedy, r), Action::move_left);
}

TEST(ChooseAction, SamplingFrequencies) {
    Rng r(2);
    const std::array<double, 5> p{0.1, 0.2, 0.3, 0.25, 0.15};
    std::array<int, 5> counts{};
    const int n = 50000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<int>(choose_action(p, ActionMode::sample, r))];
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(counts[j] / double(n), p[j], 0.01);
}

TEST(RunEpisode, NeverEatingLosesExactlyOne) {
    const Policy walk = [](const Observation&) { return std::array<double, 5>{0.25, 0.25, 0.25, 0.25, 0.0}; };
    WorldConfig c;
    for (std::uint64_t e = 0; e < 10; ++e) {
        const EpisodeResult r = run_episode(walk, 5, e, c, -0.01, ActionMode::sample, e);
        EXPECT_NEAR(r.total_reward, -1.0, 1e-12);
        EXPECT_EQ(r.net_energy_intake, 0);
    }
}

TEST(RunEpisode, RewardDecompositionAndTrace) {
    const Policy eater = [](const Observation&) { return std::array<double, 5>{0.15, 0.15, 0.15, 0.15, 0.4}; };
    WorldConfig c;
    c.n_seasons = 3;
    int steps = 0, edible = 0, poison = 0;
    double summed = 0.0;
    const EpisodeResult r = run_episode(eater, 9, 4, c, -0.02, ActionMode::sample, 4, [&](const TraceRow& row) {
        EXPECT_EQ(row.step, steps);
        EXPECT_EQ(row.season, season_index(row.step, c));
        ++steps;
        summed += row.reward;
        edible += row.consumed == Consumed::edible;
        poison += row.consumed == Consumed::poisonous;
    });
    EXPECT_EQ(steps, 100);
    EXPECT_EQ(r.net_energy_intake, edible - poison);
    EXPECT_EQ(r.total_reward, summed);
    EXPECT_NEAR(r.total_reward - r.net_energy_intake, 100 * -0.02, 1e-12);
}

TEST(RunEpisode, GreedyIsDeterministic) {
    const Policy p = [](const Observation& o) {
        std::array<double, 5> d{0.1, 0.1, 0.1, 0.1, 0.6};
        if (o[window_slot(0, 0)] == 0.0) d = {0.1, 0.6, 0.1, 0.1, 0.1};
        return d;
    };
    WorldConfig c;
    EXPECT_EQ(run_episode(p, 1, 2, c, -0.01, ActionMode::greedy), run_episode(p, 1, 2, c, -0.01, ActionMode::greedy));
}

TEST(RunEpisode, RejectsInvalidPolicy) {
    const Policy bad = [](const Observation&) { return std::array<double, 5>{1.0, 1.0, 0.0, 0.0, 0.0}; };
    EXPECT_THROW(run_episode(bad, 1, 1, WorldConfig{}, -0.01, ActionMode::sample), std::invalid_argument);
}
