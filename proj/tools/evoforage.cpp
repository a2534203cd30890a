// Command-line front end: evolve, experiment, randomwalk, analyze, plotdata,
// metrics, resume.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evoforage/complexity.hpp"
#include "evoforage/harness.hpp"

using namespace evoforage;

namespace {

// Command-line values; unset options leave the config file's value alone.
struct Overrides {
    std::string config_path;
    std::optional<std::string> profile;
    std::optional<std::uint64_t> master_seed;
    std::optional<std::string> out;
    std::optional<int> population, generations, learn_episodes, eval_episodes, train_seeds, elites;
    std::optional<double> parent_fraction, alpha;
    std::optional<std::string> eval_mode;
    std::optional<int> checkpoint_interval, episode_length;
    std::optional<std::vector<int>> environments;
    std::optional<std::vector<std::string>> regimes;
    std::optional<int> runs, workers;
    bool force_learning = false;

    void add_common(CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "JSON config file (flags override it)");
        cmd->add_option("--profile", profile, "paper or desk");
        cmd->add_option("--master-seed", master_seed, "Master seed");
        cmd->add_option("--population", population, "Population size");
        cmd->add_option("--generations", generations, "Number of generations");
        cmd->add_option("--learn-episodes", learn_episodes, "Lifetime learning episodes per individual");
        cmd->add_option("--eval-episodes", eval_episodes, "Evaluation episodes per individual");
        cmd->add_option("--train-seeds", train_seeds, "Size of the fixed training seed set");
        cmd->add_option("--elites", elites, "Elites kept per generation");
        cmd->add_option("--parent-fraction", parent_fraction, "Fraction of the population used as parents");
        cmd->add_option("--alpha", alpha, "Size penalty weight for random_size_penalty");
        cmd->add_option("--eval-mode", eval_mode, "Evaluation action selection: sample or greedy");
        cmd->add_option("--checkpoint-interval", checkpoint_interval, "Generations between checkpoints (0 = off)");
        cmd->add_option("--episode-length", episode_length, "Steps per episode");
    }

    void add_grid(CLI::App* cmd) {
        cmd->add_option("--environments", environments, "Season counts, e.g. 1 2 3 4");
        cmd->add_option("--regimes", regimes, "Energy regimes, e.g. NEC EC");
        cmd->add_option("--runs", runs, "Runs per cell");
        cmd->add_option("--workers", workers, "Concurrent runs (0 = all cores)");
    }

    ExperimentSpec build() const {
        nlohmann::json cfg = nlohmann::json::object();
        if (!config_path.empty()) {
            try {
                cfg = read_json(config_path);
            } catch (const std::exception& e) {
                throw ConfigError("cannot read config " + config_path + ": " + e.what());
            }
        }
        std::string name = profile.value_or(cfg.value("profile", std::string("paper")));
        ExperimentSpec spec;
        spec.apply_profile(profile_by_name(name));
        spec = experiment_spec_from_json(cfg, spec);
        spec.profile = name;

        auto& b = spec.base;
        if (master_seed) spec.master_seed = *master_seed;
        if (out) spec.output_dir = *out;
        if (population) b.population_size = *population;
        if (generations) b.generations = *generations;
        if (learn_episodes) b.learn_episodes = *learn_episodes;
        if (eval_episodes) b.eval_episodes = *eval_episodes;
        if (train_seeds) b.train_seed_count = *train_seeds;
        if (elites) b.elites = *elites;
        if (parent_fraction) b.parent_fraction = *parent_fraction;
        if (alpha) b.size_penalty_alpha = *alpha;
        if (eval_mode) b.eval_mode = parse_action_mode(*eval_mode);
        if (checkpoint_interval) b.checkpoint_interval = *checkpoint_interval;
        if (episode_length) b.world.episode_length = *episode_length;
        if (force_learning) b.force_learning = true;
        if (environments) spec.environments = *environments;
        if (regimes) {
            spec.regimes.clear();
            for (const auto& r : *regimes) spec.regimes.push_back(parse_regime(r));
        }
        if (runs) spec.runs_per_cell = *runs;
        if (workers) spec.workers = *workers;
        return spec;
    }
};

int report(const ExperimentOutcome& o, const fs::path& dir) {
    std::cout << o.runs_total - o.runs_failed << "/" << o.runs_total << " runs complete in " << dir.string() << '\n';
    return o.exit_code();
}

int cmd_metrics(const std::string& edges, const std::string& genome_file, std::uint64_t seed) {
    std::cout << "source,n_s,modularity,efficiency,n_c\n";
    if (!edges.empty()) {
        std::ifstream in(edges);
        if (!in) {
            std::cerr << "cannot open " << edges << '\n';
            return kExitAnalysisInputMissing;
        }
        const auto pairs = read_edge_list(in);
        // N_S of a directed edge list: distinct edges plus nodes with an incoming edge.
        std::set<std::pair<int, int>> unique;
        std::set<int> targets;
        for (const auto& [u, v] : pairs)
            if (u != v && unique.emplace(u, v).second) targets.insert(v);
        const auto r = complexity_report(GraphView::from_edges(pairs),
                                         static_cast<int>(unique.size() + targets.size()), seed);
        std::cout << csv_escape(edges) << ',' << r.n_s << ',' << format_real(r.modularity) << ','
                  << format_real(r.efficiency) << ',' << format_real(r.n_c) << '\n';
        return kExitOk;
    }
    std::ifstream in(genome_file);
    if (!in) {
        std::cerr << "cannot open " << genome_file << '\n';
        return kExitAnalysisInputMissing;
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = nlohmann::json::parse(line);
        const Genome g = genome_from_json(j.contains("genome") ? j.at("genome") : j);
        const auto r = complexity_report(g, seed);
        std::cout << csv_escape(genome_file + ":" + std::to_string(lineno)) << ',' << r.n_s << ','
                  << format_real(r.modularity) << ',' << format_real(r.efficiency) << ',' << format_real(r.n_c)
                  << '\n';
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neuroevolution of foraging agents under energy constraints"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(build_version()));

    Overrides ov;

    auto* evolve = app.add_subcommand("evolve", "Run one evolutionary run for a single cell");
    ov.add_common(evolve);
    std::string regime = "NEC", mode = "task";
    int seasons = 1, run_index = 0;
    evolve->add_option("--regime", regime, "NEC or EC");
    evolve->add_option("--seasons", seasons, "Number of seasons (1-4)");
    evolve->add_option("--run-index", run_index, "Run index used for seed derivation");
    evolve->add_option("--fitness-mode", mode, "task, random or random_size_penalty");
    evolve->add_option("-o,--out", ov.out, "Run directory")->required();
    evolve->add_flag("--force-learning", ov.force_learning, "Learn even under random fitness");

    auto* experiment = app.add_subcommand("experiment", "Run the NEC/EC x seasons x runs grid");
    ov.add_common(experiment);
    ov.add_grid(experiment);
    experiment->add_option("-o,--out", ov.out, "Output directory");

    auto* randomwalk = app.add_subcommand("randomwalk", "Random-fitness control runs");
    ov.add_common(randomwalk);
    ov.add_grid(randomwalk);
    std::string penalty = "off";
    randomwalk->add_option("--penalty", penalty, "Size penalty: on or off")->check(CLI::IsMember({"on", "off"}));
    randomwalk->add_option("-o,--out", ov.out, "Output directory");
    randomwalk->add_flag("--force-learning", ov.force_learning, "Run lifetime learning anyway");

    auto* analyze_cmd = app.add_subcommand("analyze", "Statistics over a finished experiment tree");
    std::string dir;
    int n_boot = 5000;
    std::uint64_t stats_seed = 0;
    analyze_cmd->add_option("dir", dir, "Experiment directory")->required();
    analyze_cmd->add_option("--n-boot", n_boot, "Bootstrap replicates for mediation");
    analyze_cmd->add_option("--seed", stats_seed, "Bootstrap seed");

    auto* plot = app.add_subcommand("plotdata", "Plot-ready CSVs for a finished experiment tree");
    std::vector<std::string> extra;
    plot->add_option("dir", dir, "Experiment directory")->required();
    plot->add_option("--extra", extra, "Additional trees (e.g. random walks) for the scatter data");

    auto* metrics = app.add_subcommand("metrics", "Complexity metrics of an edge list or genome file");
    std::string edges, genome_file;
    std::uint64_t metric_seed = 0;
    auto* edges_opt = metrics->add_option("--edges", edges, "Edge list: one 'u v' pair per line");
    auto* genome_opt = metrics->add_option("--genome", genome_file, "Line-delimited genome file");
    edges_opt->excludes(genome_opt);
    metrics->add_option("--seed", metric_seed, "Louvain seed");

    auto* resume = app.add_subcommand("resume", "Continue a run or experiment from its checkpoints");
    resume->add_option("dir", dir, "Run or experiment directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (*evolve) {
            ExperimentSpec spec = ov.build();
            EvolutionConfig cfg = spec.base;
            cfg.regime = parse_regime(regime);
            cfg.n_seasons = seasons;
            cfg.fitness_mode = parse_fitness_mode(mode);
            cfg.run_seed = derive_run_seed(spec.master_seed, cfg.regime, seasons, run_index);
            cfg.validate();
            const nlohmann::json provenance{{"master_seed", spec.master_seed},
                                            {"run_index", run_index},
                                            {"cell", Cell{cfg.regime, seasons, cfg.fitness_mode}.name()},
                                            {"profile", spec.profile}};
            const bool ok = execute_run(cfg, *ov.out, provenance);
            std::cout << (ok ? "run complete: " : "run failed: ") << *ov.out << '\n';
            return ok ? kExitOk : kExitPartialFailure;
        }
        if (*experiment) {
            const ExperimentSpec spec = ov.build();
            spec.validate();
            return report(run_experiment(spec), spec.output_dir);
        }
        if (*randomwalk) {
            const ExperimentSpec spec = ov.build();
            spec.validate();
            return report(run_randomwalk(spec, penalty == "on"), spec.output_dir);
        }
        if (*analyze_cmd) return analyze(dir, n_boot, stats_seed);
        if (*plot) {
            std::vector<fs::path> extra_paths(extra.begin(), extra.end());
            return emit_plotdata(dir, extra_paths);
        }
        if (*metrics) {
            if (edges.empty() && genome_file.empty()) {
                std::cerr << "metrics: give --edges or --genome\n";
                return kExitConfigError;
            }
            return cmd_metrics(edges, genome_file, metric_seed);
        }
        if (*resume) {
            const auto manifest = read_json(fs::path(dir) / "manifest.json");
            if (manifest.value("kind", "") == "run") {
                const bool ok = resume_run(dir);
                std::cout << (ok ? "run complete: " : "run failed: ") << dir << '\n';
                return ok ? kExitOk : kExitPartialFailure;
            }
            return report(resume_experiment(dir), dir);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPartialFailure;
    }
    return kExitOk;
}
