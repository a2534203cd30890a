#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evoforage/evolution.hpp"

namespace evoforage {

namespace fs = std::filesystem;

inline constexpr int kCsvFormatVersion = 1;
inline constexpr int kManifestFormatVersion = 1;

enum ExitCode : int {
    kExitOk = 0,
    kExitConfigError = 2,
    kExitPartialFailure = 3,
    kExitAnalysisInputMissing = 4,
};

/// `git describe` of the build.
const char* build_version();

struct Profile {
    std::string name;
    int population_size = 0;
    int generations = 0;
    int learn_episodes = 0;
    int eval_episodes = 0;
    int runs_per_cell = 0;
};

/// "paper" (150/400/1000/100/20) or "desk" (24/30/50/20/5). Throws ConfigError.
Profile profile_by_name(const std::string& name);

struct ExperimentSpec {
    std::vector<int> environments{1, 2, 3, 4};
    std::vector<Regime> regimes{Regime::NEC, Regime::EC};
    int runs_per_cell = 20;
    EvolutionConfig base;  // regime, n_seasons and run_seed are set per run
    std::uint64_t master_seed = 0;
    fs::path output_dir = "results";
    std::string profile = "paper";
    int workers = 0;  // concurrent runs; 0 = OpenMP default

    void apply_profile(const Profile& p);
    void validate() const;
};

nlohmann::json to_json(const ExperimentSpec& s);
/// Fields present in `j` override `base`. "evolution" holds EvolutionConfig keys.
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j, ExperimentSpec base);

/// hash(master_seed, regime, n_seasons, run_index).
std::uint64_t derive_run_seed(std::uint64_t master_seed, Regime regime, int n_seasons, int run_index);

/// One (regime or fitness mode) x season-count combination.
struct Cell {
    Regime regime = Regime::NEC;
    int n_seasons = 1;
    FitnessMode mode = FitnessMode::task;

    std::string name() const;  // "NEC_s1", "random_size_penalty_s2", ...
};

/// Writes one run into `run_dir`. Returns false (and records the cause in the
/// run manifest) if the run failed.
bool execute_run(const EvolutionConfig& config, const fs::path& run_dir, const nlohmann::json& provenance,
                 Execution execution = Execution::parallel);

/// Continues a run from its latest checkpoint (or from scratch without one).
bool resume_run(const fs::path& run_dir, Execution execution = Execution::parallel);

struct ExperimentOutcome {
    int runs_total = 0;
    int runs_failed = 0;
    int exit_code() const { return runs_failed ? kExitPartialFailure : kExitOk; }
};

/// Task-mode grid: regimes x environments x runs.
ExperimentOutcome run_experiment(const ExperimentSpec& spec);

/// Random-fitness controls; lifetime learning is skipped unless
/// spec.base.force_learning is set.
ExperimentOutcome run_randomwalk(const ExperimentSpec& spec, bool size_penalty);

/// Resumes every unfinished run of an experiment tree and rebuilds the aggregates.
ExperimentOutcome resume_experiment(const fs::path& dir);

/// Statistics bundle into <dir>/analysis. Returns an exit code.
int analyze(const fs::path& dir, int n_boot = 5000, std::uint64_t seed = 0);

/// Plot-ready CSVs into <dir>/plotdata; `extra` trees contribute scatter rows.
int emit_plotdata(const fs::path& dir, const std::vector<fs::path>& extra = {});

// CSV helpers (RFC-4180 quoting, leading "# format_version=N" comment).

std::string csv_escape(const std::string& field);
std::string format_real(double v);

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& fields);
    void flush();

private:
    std::ofstream out_;
};

struct CsvTable {
    int format_version = -1;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;  // throws if absent
};

class FormatVersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws FormatVersionError unless the file declares `expected_version`.
CsvTable read_csv(const fs::path& path, int expected_version = kCsvFormatVersion);
std::vector<std::vector<std::string>> parse_csv(std::istream& in);

std::vector<std::string> record_header();
std::vector<std::string> record_fields(const GenerationRecord& r, FitnessMode mode);

nlohmann::json read_json(const fs::path& path);
/// Writes through a temporary file and renames it into place.
void write_json(const fs::path& path, const nlohmann::json& j);

}  // namespace evoforage
