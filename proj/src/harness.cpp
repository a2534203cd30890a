#include "evoforage/harness.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <omp.h>

#include "evoforage/stats.hpp"

#ifndef EVOFORAGE_GIT_DESCRIBE
#define EVOFORAGE_GIT_DESCRIBE "unknown"
#endif

namespace evoforage {

const char* build_version() { return EVOFORAGE_GIT_DESCRIBE; }

Profile profile_by_name(const std::string& name) {
    if (name == "paper") return {"paper", 150, 400, 1000, 100, 20};
    if (name == "desk") return {"desk", 24, 30, 50, 20, 5};
    throw ConfigError("unknown profile '" + name + "' (expected paper or desk)");
}

void ExperimentSpec::apply_profile(const Profile& p) {
    profile = p.name;
    base.population_size = p.population_size;
    base.generations = p.generations;
    base.learn_episodes = p.learn_episodes;
    base.eval_episodes = p.eval_episodes;
    runs_per_cell = p.runs_per_cell;
}

void ExperimentSpec::validate() const {
    if (environments.empty()) throw ConfigError("environments must not be empty");
    if (regimes.empty()) throw ConfigError("regimes must not be empty");
    std::set<int> envs;
    for (int e : environments) {
        if (e < 1 || e > 4) throw ConfigError("environments must be in 1..4");
        if (!envs.insert(e).second) throw ConfigError("duplicate environment " + std::to_string(e));
    }
    if (std::set<Regime>(regimes.begin(), regimes.end()).size() != regimes.size())
        throw ConfigError("duplicate regime");
    if (runs_per_cell < 1) throw ConfigError("runs_per_cell must be at least 1");
    if (workers < 0) throw ConfigError("workers must be non-negative");
    if (output_dir.empty()) throw ConfigError("output directory must be set");
    EvolutionConfig c = base;
    c.n_seasons = environments.front();
    c.validate();
}

nlohmann::json to_json(const ExperimentSpec& s) {
    nlohmann::json regimes = nlohmann::json::array();
    for (Regime r : s.regimes) regimes.push_back(to_string(r));
    return {{"profile", s.profile},
            {"environments", s.environments},
            {"regimes", regimes},
            {"runs_per_cell", s.runs_per_cell},
            {"master_seed", s.master_seed},
            {"output_dir", s.output_dir.string()},
            {"workers", s.workers},
            {"evolution", to_json(s.base)}};
}

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j, ExperimentSpec s) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    try {
        if (j.contains("environments")) s.environments = j.at("environments").get<std::vector<int>>();
        if (j.contains("regimes")) {
            s.regimes.clear();
            for (const auto& r : j.at("regimes")) s.regimes.push_back(parse_regime(r.get<std::string>()));
        }
        if (j.contains("runs_per_cell")) s.runs_per_cell = j.at("runs_per_cell").get<int>();
        if (j.contains("master_seed")) s.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("workers")) s.workers = j.at("workers").get<int>();
        if (j.contains("profile")) s.profile = j.at("profile").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (j.contains("evolution")) s.base = evolution_config_from_json(j.at("evolution"), s.base);
    return s;
}

std::uint64_t derive_run_seed(std::uint64_t master_seed, Regime regime, int n_seasons, int run_index) {
    return derive_seed(master_seed, {tag("run"), static_cast<std::uint64_t>(regime),
                                     static_cast<std::uint64_t>(n_seasons), static_cast<std::uint64_t>(run_index)});
}

std::string Cell::name() const {
    const std::string prefix = mode == FitnessMode::task ? to_string(regime) : to_string(mode);
    return prefix + "_s" + std::to_string(n_seasons);
}

// ---------------------------------------------------------------- CSV / JSON

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out_ << "# format_version=" << kCsvFormatVersion << "\r\n";
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(fields[i]);
    }
    out_ << "\r\n";
    if (!out_) throw std::runtime_error("CSV write failed");
}

void CsvWriter::flush() { out_.flush(); }

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("CSV column '" + name + "' missing");
    return static_cast<std::size_t>(it - header.begin());
}

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false;
    char c = 0;
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        if (field_started || !row.empty()) {
            end_field();
            rows.push_back(std::move(row));
        }
        row.clear();
    };
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"': quoted = true; field_started = true; break;
        case ',': end_field(); field_started = true; break;
        case '\r': break;
        case '\n': end_row(); break;
        default: field += c; field_started = true;
        }
    }
    if (quoted) throw std::runtime_error("CSV: unterminated quoted field");
    end_row();
    return rows;
}

CsvTable read_csv(const fs::path& path, int expected_version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    CsvTable t;
    std::string first;
    std::getline(in, first);
    if (!first.empty() && first.back() == '\r') first.pop_back();
    const std::string prefix = "# format_version=";
    if (first.rfind(prefix, 0) != 0) throw FormatVersionError(path.string() + ": missing format_version line");
    try {
        t.format_version = std::stoi(first.substr(prefix.size()));
    } catch (const std::exception&) {
        throw FormatVersionError(path.string() + ": malformed format_version line");
    }
    if (t.format_version != expected_version)
        throw FormatVersionError(path.string() + ": format_version " + std::to_string(t.format_version) +
                                 " (expected " + std::to_string(expected_version) + ")");
    auto rows = parse_csv(in);
    if (rows.empty()) throw std::runtime_error(path.string() + ": missing header");
    t.header = std::move(rows.front());
    t.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
    return t;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << j.dump(2) << '\n';
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<std::string> record_header() {
    return {"run_seed",   "generation",   "regime",         "n_seasons",  "fitness_mode",
            "best_fitness", "best_task_performance", "best_n_s", "best_n_c", "mean_fitness",
            "mean_n_s",   "best_genome_id", "n_diverged"};
}

std::vector<std::string> record_fields(const GenerationRecord& r, FitnessMode mode) {
    return {std::to_string(r.run_seed),
            std::to_string(r.generation),
            to_string(r.regime),
            std::to_string(r.n_seasons),
            to_string(mode),
            format_real(r.best_fitness),
            format_real(r.best_task_performance),
            std::to_string(r.best_n_s),
            format_real(r.best_n_c),
            format_real(r.mean_fitness),
            format_real(r.mean_n_s),
            std::to_string(r.best_genome_id),
            std::to_string(r.n_diverged)};
}

// ---------------------------------------------------------------- runs

namespace {

constexpr const char* kRecordsFile = "records.csv";
constexpr const char* kTimingFile = "timing.csv";
constexpr const char* kFittestFile = "fittest.jsonl";
constexpr const char* kCheckpointFile = "checkpoint.json";
constexpr const char* kFinalPopulationFile = "final_population.jsonl";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kFinalGenerationFile = "final_generation.csv";
constexpr const char* kSummaryFile = "summary.csv";
constexpr const char* kScatterFile = "scatter.csv";

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

nlohmann::json format_versions() {
    return {{"csv", kCsvFormatVersion},
            {"genome", kGenomeFormatVersion},
            {"checkpoint", kCheckpointFormatVersion},
            {"manifest", kManifestFormatVersion}};
}

nlohmann::json run_manifest(const EvolutionConfig& config, const nlohmann::json& provenance, const std::string& status,
                            const std::string& error, int generations_completed) {
    const nlohmann::json cfg = to_json(config);
    return {{"format_version", kManifestFormatVersion},
            {"kind", "run"},
            {"git_describe", build_version()},
            {"config", cfg},
            {"config_hash", hex64(tag(cfg.dump()))},
            {"provenance", provenance},
            {"formats", format_versions()},
            {"status", status},
            {"error", error},
            {"generations_completed", generations_completed}};
}

nlohmann::json fittest_line(const GenerationRecord& r, const Individual& best) {
    return {{"generation", r.generation},
            {"fitness", hex_double(best.fitness)},
            {"task_performance", hex_double(best.task_performance)},
            {"n_s", best.complexity.n_s},
            {"n_c", hex_double(best.complexity.n_c)},
            {"genome", to_json(best.genome)}};
}

// Keeps the first `n` lines of a text file (missing file counts as empty).
void truncate_lines(const fs::path& path, std::size_t n) {
    std::vector<std::string> lines;
    {
        std::ifstream in(path, std::ios::binary);
        std::string line;
        while (lines.size() < n && std::getline(in, line)) lines.push_back(line);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
}

bool run_with_state(const EvolutionConfig& config, EvolutionState& state, const fs::path& dir,
                    const nlohmann::json& provenance, Execution execution) {
    write_json(dir / kManifestFile,
               run_manifest(config, provenance, "running", "", static_cast<int>(state.records.size())));
    CsvWriter records(dir / kRecordsFile, record_header());
    CsvWriter timing(dir / kTimingFile, {"generation", "wall_time"});
    for (const auto& r : state.records) {
        records.row(record_fields(r, config.fitness_mode));
        timing.row({std::to_string(r.generation), format_real(r.wall_time)});
    }
    records.flush();
    truncate_lines(dir / kFittestFile, state.records.size());
    std::ofstream fittest(dir / kFittestFile, std::ios::binary | std::ios::app);

    EvolutionHooks hooks;
    hooks.on_generation = [&](const GenerationRecord& r, const Individual& best) {
        records.row(record_fields(r, config.fitness_mode));
        records.flush();
        timing.row({std::to_string(r.generation), format_real(r.wall_time)});
        timing.flush();
        fittest << fittest_line(r, best).dump() << '\n';
        fittest.flush();
    };
    hooks.on_checkpoint = [&](const EvolutionState& s) {
        write_json(dir / kCheckpointFile, checkpoint_to_json(config, s));
    };

    try {
        run_evolution(config, state, hooks, execution);
        std::ofstream final_pop(dir / kFinalPopulationFile, std::ios::binary | std::ios::trunc);
        for (const auto& ind : state.population) {
            final_pop << nlohmann::json{{"genome_id", ind.genome.genome_id},
                                        {"fitness", hex_double(ind.fitness)},
                                        {"task_performance", hex_double(ind.task_performance)},
                                        {"evaluated", ind.evaluated},
                                        {"n_s", ind.complexity.n_s},
                                        {"n_c", hex_double(ind.complexity.n_c)},
                                        {"genome", to_json(ind.genome)}}
                             .dump()
                      << '\n';
        }
        write_json(dir / kManifestFile,
                   run_manifest(config, provenance, "complete", "", static_cast<int>(state.records.size())));
        return true;
    } catch (const std::exception& e) {
        write_json(dir / kManifestFile,
                   run_manifest(config, provenance, "failed", e.what(), static_cast<int>(state.records.size())));
        return false;
    }
}

}  // namespace

bool execute_run(const EvolutionConfig& config, const fs::path& run_dir, const nlohmann::json& provenance,
                 Execution execution) {
    fs::create_directories(run_dir);
    for (const char* f : {kRecordsFile, kTimingFile, kFittestFile, kCheckpointFile, kFinalPopulationFile})
        fs::remove(run_dir / f);
    EvolutionState state;
    try {
        state = initial_state(config);
    } catch (const std::exception& e) {
        write_json(run_dir / kManifestFile, run_manifest(config, provenance, "failed", e.what(), 0));
        return false;
    }
    return run_with_state(config, state, run_dir, provenance, execution);
}

bool resume_run(const fs::path& run_dir, Execution execution) {
    const auto manifest = read_json(run_dir / kManifestFile);
    if (manifest.value("kind", "") != "run") throw std::runtime_error(run_dir.string() + " is not a run directory");
    if (manifest.value("status", "") == "complete") return true;
    const EvolutionConfig config = evolution_config_from_json(manifest.at("config"));
    const nlohmann::json provenance = manifest.value("provenance", nlohmann::json::object());
    const fs::path ckpt = run_dir / kCheckpointFile;
    if (!fs::exists(ckpt)) return execute_run(config, run_dir, provenance, execution);
    EvolutionConfig saved;
    EvolutionState state = checkpoint_from_json(read_json(ckpt), &saved);
    if (to_json(saved) != to_json(config)) throw std::runtime_error("checkpoint config differs from run manifest");
    return run_with_state(config, state, run_dir, provenance, execution);
}

// ---------------------------------------------------------------- experiments

namespace {

struct Job {
    Cell cell;
    int run_index = 0;
    EvolutionConfig config;
    fs::path rel_dir;
};

fs::path run_rel_dir(const Cell& c, int run_index) { return fs::path(c.name()) / ("run_" + std::to_string(run_index)); }

nlohmann::json job_provenance(const ExperimentSpec& spec, const Job& job) {
    return {{"master_seed", spec.master_seed},
            {"run_index", job.run_index},
            {"cell", job.cell.name()},
            {"profile", spec.profile}};
}

std::vector<Job> plan_jobs(const ExperimentSpec& spec, std::optional<FitnessMode> random_mode) {
    std::vector<Job> jobs;
    std::vector<Regime> regimes = spec.regimes;
    if (random_mode) regimes = {spec.base.regime};
    for (Regime r : regimes)
        for (int env : spec.environments)
            for (int i = 0; i < spec.runs_per_cell; ++i) {
                Job j;
                j.cell = Cell{r, env, random_mode.value_or(FitnessMode::task)};
                j.run_index = i;
                j.config = spec.base;
                j.config.regime = r;
                j.config.n_seasons = env;
                j.config.fitness_mode = j.cell.mode;
                j.config.run_seed = derive_run_seed(spec.master_seed, r, env, i);
                j.rel_dir = run_rel_dir(j.cell, i);
                jobs.push_back(std::move(j));
            }
    return jobs;
}

nlohmann::json experiment_manifest(const ExperimentSpec& spec, const std::string& kind, const std::vector<Job>& jobs,
                                   const std::vector<std::string>& status, const std::vector<std::string>& errors) {
    nlohmann::json runs = nlohmann::json::array();
    int failed = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        runs.push_back({{"dir", jobs[i].rel_dir.generic_string()},
                        {"cell", jobs[i].cell.name()},
                        {"regime", to_string(jobs[i].cell.regime)},
                        {"n_seasons", jobs[i].cell.n_seasons},
                        {"fitness_mode", to_string(jobs[i].cell.mode)},
                        {"run_index", jobs[i].run_index},
                        {"run_seed", jobs[i].config.run_seed},
                        {"status", status[i]},
                        {"error", errors[i]}});
        failed += status[i] == "failed" ? 1 : 0;
    }
    const nlohmann::json spec_json = to_json(spec);
    return {{"format_version", kManifestFormatVersion},
            {"kind", kind},
            {"git_describe", build_version()},
            {"spec", spec_json},
            {"config_hash", hex64(tag(spec_json.dump()))},
            {"formats", format_versions()},
            {"runs", runs},
            {"runs_failed", failed}};
}

std::string run_error(const fs::path& run_dir) {
    try {
        return read_json(run_dir / kManifestFile).value("error", "");
    } catch (const std::exception& e) {
        return e.what();
    }
}

struct RunRow {
    std::string rel_dir;
    std::string cell;
    std::string regime;
    int n_seasons = 0;
    std::string mode;
    int run_index = 0;
    std::uint64_t run_seed = 0;
    double fitness = 0.0;
    double task_performance = 0.0;
    double n_s = 0.0;
    double n_c = 0.0;
};

double median_of(std::vector<double> v) { return v.empty() ? std::nan("") : median(std::move(v)); }

double mean_of(const std::vector<double>& v) {
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Final-generation table, summary and scatter for a finished tree.
void write_aggregates(const fs::path& dir, const nlohmann::json& manifest) {
    std::vector<RunRow> rows;
    std::map<std::string, std::pair<int, int>> cell_counts;  // completed, failed
    std::vector<std::string> cell_order;
    CsvWriter scatter(dir / kScatterFile, {"mode", "generation", "n_s", "n_c"});
    for (const auto& run : manifest.at("runs")) {
        const std::string cell = run.at("cell").get<std::string>();
        if (!cell_counts.contains(cell)) cell_order.push_back(cell);
        auto& counts = cell_counts[cell];
        if (run.at("status").get<std::string>() != "complete") {
            ++counts.second;
            continue;
        }
        ++counts.first;
        const fs::path run_dir = dir / run.at("dir").get<std::string>();
        const CsvTable t = read_csv(run_dir / kRecordsFile);
        if (t.rows.empty()) continue;
        const auto& last = t.rows.back();
        RunRow r;
        r.rel_dir = run.at("dir").get<std::string>();
        r.cell = cell;
        r.regime = run.at("regime").get<std::string>();
        r.n_seasons = run.at("n_seasons").get<int>();
        r.mode = run.at("fitness_mode").get<std::string>();
        r.run_index = run.at("run_index").get<int>();
        r.run_seed = run.at("run_seed").get<std::uint64_t>();
        r.fitness = std::stod(last[t.column("best_fitness")]);
        r.task_performance = std::stod(last[t.column("best_task_performance")]);
        r.n_s = std::stod(last[t.column("best_n_s")]);
        r.n_c = std::stod(last[t.column("best_n_c")]);
        rows.push_back(r);
        const std::size_t gi = t.column("generation"), si = t.column("best_n_s"), ci = t.column("best_n_c");
        for (const auto& rec : t.rows) scatter.row({r.mode, rec[gi], rec[si], rec[ci]});
    }

    CsvWriter fin(dir / kFinalGenerationFile, {"run", "n_seasons", "regime", "fitness", "task_performance", "n_s",
                                               "n_c", "fitness_mode", "cell", "run_seed", "run_dir"});
    for (const auto& r : rows)
        fin.row({std::to_string(r.run_index), std::to_string(r.n_seasons), r.regime, format_real(r.fitness),
                 format_real(r.task_performance), format_real(r.n_s), format_real(r.n_c), r.mode, r.cell,
                 std::to_string(r.run_seed), r.rel_dir});

    CsvWriter summary(dir / kSummaryFile,
                      {"cell", "regime", "n_seasons", "fitness_mode", "runs_completed", "runs_failed",
                       "median_fitness", "mean_fitness", "median_task_performance", "mean_task_performance",
                       "median_n_s", "mean_n_s", "median_n_c", "mean_n_c"});
    for (const auto& cell : cell_order) {
        std::vector<double> f, tp, ns, nc;
        std::string regime, mode, seasons;
        for (const auto& run : manifest.at("runs"))
            if (run.at("cell") == cell) {
                regime = run.at("regime").get<std::string>();
                mode = run.at("fitness_mode").get<std::string>();
                seasons = std::to_string(run.at("n_seasons").get<int>());
                break;
            }
        for (const auto& r : rows)
            if (r.cell == cell) {
                f.push_back(r.fitness);
                tp.push_back(r.task_performance);
                ns.push_back(r.n_s);
                nc.push_back(r.n_c);
            }
        const auto [done, failed] = cell_counts[cell];
        summary.row({cell, regime, seasons, mode, std::to_string(done), std::to_string(failed),
                     format_real(median_of(f)), format_real(mean_of(f)), format_real(median_of(tp)),
                     format_real(mean_of(tp)), format_real(median_of(ns)), format_real(mean_of(ns)),
                     format_real(median_of(nc)), format_real(mean_of(nc))});
    }
}

ExperimentOutcome run_jobs(const ExperimentSpec& spec, const std::string& kind, const std::vector<Job>& jobs,
                           const fs::path& dir, bool resume) {
    std::vector<std::string> status(jobs.size(), "pending"), errors(jobs.size());
    write_json(dir / kManifestFile, experiment_manifest(spec, kind, jobs, status, errors));

    auto run_one = [&](std::size_t k) {
        const Job& job = jobs[k];
        const fs::path run_dir = dir / job.rel_dir;
        bool ok = false;
        try {
            ok = resume && fs::exists(run_dir / kManifestFile)
                     ? resume_run(run_dir)
                     : execute_run(job.config, run_dir, job_provenance(spec, job));
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
        status[k] = ok ? "complete" : "failed";
        if (!ok && errors[k].empty()) errors[k] = run_error(run_dir);
        if (!ok) std::cerr << "run " << job.rel_dir.generic_string() << " failed: " << errors[k] << '\n';
    };

    const int workers = spec.workers > 0 ? spec.workers : omp_get_max_threads();
    if (workers <= 1 || jobs.size() <= 1) {
        for (std::size_t k = 0; k < jobs.size(); ++k) run_one(k);
    } else {
        const int saved_levels = omp_get_max_active_levels();
        omp_set_max_active_levels(1);  // evaluation inside each run stays on its worker
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
        for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(jobs.size()); ++k)
            run_one(static_cast<std::size_t>(k));
        omp_set_max_active_levels(saved_levels);
    }

    const auto manifest = experiment_manifest(spec, kind, jobs, status, errors);
    write_json(dir / kManifestFile, manifest);
    write_aggregates(dir, manifest);
    ExperimentOutcome out;
    out.runs_total = static_cast<int>(jobs.size());
    out.runs_failed = manifest.at("runs_failed").get<int>();
    return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    fs::create_directories(spec.output_dir);
    return run_jobs(spec, "experiment", plan_jobs(spec, std::nullopt), spec.output_dir, false);
}

ExperimentOutcome run_randomwalk(const ExperimentSpec& spec, bool size_penalty) {
    spec.validate();
    fs::create_directories(spec.output_dir);
    const FitnessMode mode = size_penalty ? FitnessMode::random_size_penalty : FitnessMode::random;
    return run_jobs(spec, "randomwalk", plan_jobs(spec, mode), spec.output_dir, false);
}

ExperimentOutcome resume_experiment(const fs::path& dir) {
    const auto manifest = read_json(dir / kManifestFile);
    const std::string kind = manifest.value("kind", "");
    if (kind != "experiment" && kind != "randomwalk") throw std::runtime_error(dir.string() + " is not an experiment tree");
    ExperimentSpec spec = experiment_spec_from_json(manifest.at("spec"), ExperimentSpec{});
    spec.output_dir = dir;
    std::optional<FitnessMode> mode;
    if (kind == "randomwalk") mode = parse_fitness_mode(manifest.at("runs").at(0).at("fitness_mode").get<std::string>());
    return run_jobs(spec, kind, plan_jobs(spec, mode), dir, true);
}

// ---------------------------------------------------------------- analysis

namespace {

struct FinalRow {
    int run = 0;
    int n_seasons = 0;
    std::string regime;
    std::string mode;
    std::string run_dir;
    std::map<std::string, double> metric;
};

const std::vector<std::string> kMetrics{"fitness", "task_performance", "n_s", "n_c"};
const std::vector<std::pair<std::string, std::string>> kTrendMetrics{
    {"n_s", "best_n_s"}, {"n_c", "best_n_c"}, {"fitness", "best_fitness"}, {"task_performance", "best_task_performance"}};

std::vector<FinalRow> load_final(const fs::path& dir) {
    const CsvTable t = read_csv(dir / kFinalGenerationFile);
    std::vector<FinalRow> rows;
    const bool has_mode = std::find(t.header.begin(), t.header.end(), "fitness_mode") != t.header.end();
    const bool has_dir = std::find(t.header.begin(), t.header.end(), "run_dir") != t.header.end();
    for (const auto& r : t.rows) {
        FinalRow f;
        f.run = std::stoi(r[t.column("run")]);
        f.n_seasons = std::stoi(r[t.column("n_seasons")]);
        f.regime = r[t.column("regime")];
        f.mode = has_mode ? r[t.column("fitness_mode")] : "task";
        f.run_dir = has_dir ? r[t.column("run_dir")] : "";
        for (const auto& m : kMetrics) f.metric[m] = std::stod(r[t.column(m)]);
        rows.push_back(std::move(f));
    }
    return rows;
}

std::string season_label(int s) { return std::to_string(s) + (s == 1 ? " season" : " seasons"); }

}  // namespace

int analyze(const fs::path& dir, int n_boot, std::uint64_t seed) {
    std::vector<FinalRow> rows;
    try {
        if (!fs::exists(dir / kFinalGenerationFile)) {
            std::cerr << "analyze: " << (dir / kFinalGenerationFile).string() << " not found\n";
            return kExitAnalysisInputMissing;
        }
        rows = load_final(dir);
    } catch (const FormatVersionError& e) {
        std::cerr << "analyze: " << e.what() << '\n';
        return kExitAnalysisInputMissing;
    }
    std::erase_if(rows, [](const FinalRow& r) { return r.mode != "task"; });

    std::vector<std::string> warnings;
    const fs::path out = dir / "analysis";
    fs::create_directories(out);

    std::set<int> expected_envs;
    std::set<std::string> expected_regimes;
    if (fs::exists(dir / kManifestFile)) {
        const auto m = read_json(dir / kManifestFile);
        if (m.contains("spec")) {
            for (int e : m["spec"].value("environments", std::vector<int>{})) expected_envs.insert(e);
            for (const auto& r : m["spec"].value("regimes", std::vector<std::string>{})) expected_regimes.insert(r);
        }
    }
    std::map<std::string, std::map<int, std::vector<const FinalRow*>>> cells;
    for (const auto& r : rows) cells[r.regime][r.n_seasons].push_back(&r);
    for (const auto& reg : expected_regimes)
        for (int e : expected_envs)
            if (!cells.contains(reg) || !cells[reg].contains(e))
                warnings.push_back("cell " + reg + "_s" + std::to_string(e) + " has no completed runs");
    if (rows.empty()) warnings.push_back("no task-mode runs found");

    CsvWriter kw(out / "kruskal.csv", {"regime", "metric", "groups", "n", "H", "p_value", "eta_squared"});
    CsvWriter dunn(out / "dunn.csv", {"regime", "metric", "group_a", "group_b", "z", "p_raw", "p_adjusted"});
    CsvWriter sp_seasons(out / "spearman_seasons.csv", {"regime", "metric", "n", "rho", "p_value"});
    for (const auto& [regime, by_env] : cells) {
        for (const auto& metric : kMetrics) {
            std::vector<SampleGroup> groups;
            std::vector<double> xs, ys;
            for (const auto& [env, rs] : by_env) {
                SampleGroup g{season_label(env), {}};
                for (const FinalRow* r : rs) {
                    g.values.push_back(r->metric.at(metric));
                    xs.push_back(env);
                    ys.push_back(r->metric.at(metric));
                }
                groups.push_back(std::move(g));
            }
            if (groups.size() >= 2) {
                const auto h = kruskal_wallis(groups);
                kw.row({regime, metric, std::to_string(groups.size()), std::to_string(xs.size()),
                        format_real(h.statistic), format_real(h.p_value), format_real(h.effect_size.value_or(0.0))});
                const auto d = dunn_posthoc(groups);
                for (std::size_t i = 0; i < groups.size(); ++i)
                    for (std::size_t j = i + 1; j < groups.size(); ++j)
                        dunn.row({regime, metric, d.labels[i], d.labels[j], format_real(d.z[i][j]),
                                  format_real(d.p_raw[i][j]), format_real(d.p_adjusted[i][j])});
            } else {
                warnings.push_back(regime + "/" + metric + ": fewer than two season groups, Kruskal-Wallis skipped");
            }
            try {
                if (xs.size() < 3) throw StatsError("fewer than 3 runs");
                const auto s = spearman(xs, ys);
                sp_seasons.row({regime, metric, std::to_string(xs.size()), format_real(s.statistic),
                                format_real(s.p_value)});
            } catch (const StatsError& e) {
                warnings.push_back(regime + "/" + metric + " vs seasons: Spearman undefined (" + e.what() + ")");
                sp_seasons.row({regime, metric, std::to_string(xs.size()), "nan", "nan"});
            }
        }
    }

    CsvWriter sp_trend(out / "spearman_trend.csv", {"regime", "n_seasons", "metric", "n", "rho", "p_value"});
    for (const auto& [regime, by_env] : cells)
        for (const auto& [env, rs] : by_env)
            for (const auto& [metric, column] : kTrendMetrics) {
                std::vector<double> gen, val;
                for (const FinalRow* r : rs) {
                    if (r->run_dir.empty()) continue;
                    try {
                        const CsvTable t = read_csv(dir / r->run_dir / kRecordsFile);
                        const std::size_t gi = t.column("generation"), vi = t.column(column);
                        for (const auto& rec : t.rows) {
                            gen.push_back(std::stod(rec[gi]));
                            val.push_back(std::stod(rec[vi]));
                        }
                    } catch (const std::exception& e) {
                        warnings.push_back(r->run_dir + ": " + e.what());
                    }
                }
                try {
                    if (gen.size() < 3) throw StatsError("fewer than 3 records");
                    const auto s = spearman(gen, val);
                    sp_trend.row({regime, std::to_string(env), metric, std::to_string(gen.size()),
                                  format_real(s.statistic), format_real(s.p_value)});
                } catch (const StatsError& e) {
                    warnings.push_back(regime + "_s" + std::to_string(env) + "/" + metric +
                                       " vs generation: Spearman undefined (" + e.what() + ")");
                    sp_trend.row({regime, std::to_string(env), metric, std::to_string(gen.size()), "nan", "nan"});
                }
            }

    CsvWriter energy(out / "energy_impact.csv",
                     {"n_seasons", "metric", "n_nec", "n_ec", "median_nec", "median_ec", "U", "p_value"});
    if (cells.contains("NEC") && cells.contains("EC")) {
        for (const auto& [env, nec_rows] : cells["NEC"]) {
            if (!cells["EC"].contains(env)) {
                warnings.push_back("energy impact: EC_s" + std::to_string(env) + " missing");
                continue;
            }
            const auto& ec_rows = cells["EC"][env];
            for (const auto& metric : kMetrics) {
                std::vector<double> a, b;
                for (const FinalRow* r : nec_rows) a.push_back(r->metric.at(metric));
                for (const FinalRow* r : ec_rows) b.push_back(r->metric.at(metric));
                const auto u = mann_whitney_u(a, b);
                energy.row({std::to_string(env), metric, std::to_string(a.size()), std::to_string(b.size()),
                            format_real(median_of(a)), format_real(median_of(b)), format_real(u.statistic),
                            format_real(u.p_value)});
            }
        }
    } else {
        warnings.push_back("energy impact: both NEC and EC results are needed");
    }

    CsvWriter med(out / "mediation.csv", {"term", "level", "estimate", "ci_low", "ci_high", "n_bootstrap",
                                          "n_skipped", "interval"});
    if (cells.contains("EC") && cells["EC"].size() >= 2) {
        std::vector<int> seasons;
        std::vector<double> mediator, outcome;
        for (const auto& [env, rs] : cells["EC"])
            for (const FinalRow* r : rs) {
                seasons.push_back(env);
                mediator.push_back(r->metric.at("task_performance"));
                outcome.push_back(r->metric.at("n_s"));
            }
        try {
            const auto m = bootstrap_mediation(seasons, mediator, outcome, n_boot, seed);
            const std::string nb = std::to_string(m.n_bootstrap), ns = std::to_string(m.n_skipped);
            for (std::size_t j = 0; j < m.a_paths.size(); ++j)
                med.row({"a", std::to_string(m.levels[j + 1]), format_real(m.a_paths[j]), "", "", nb, ns, m.interval});
            med.row({"b", "", format_real(m.b_path), "", "", nb, ns, m.interval});
            for (std::size_t j = 0; j < m.per_level_ab.size(); ++j)
                med.row({"ab", std::to_string(m.levels[j + 1]), format_real(m.per_level_ab[j]), "", "", nb, ns,
                         m.interval});
            med.row({"ab", "mean", format_real(m.indirect_ab), format_real(m.ci_low), format_real(m.ci_high), nb, ns,
                     m.interval});
            if (m.n_skipped > 0)
                warnings.push_back("mediation: " + ns + " rank-deficient bootstrap replicates skipped");
        } catch (const std::exception& e) {
            warnings.push_back(std::string("mediation: ") + e.what());
        }
    } else {
        warnings.push_back("mediation: needs EC results from at least two environments");
    }

    std::ofstream warn(out / "warnings.txt", std::ios::binary);
    for (const auto& w : warnings) {
        warn << w << '\n';
        std::cerr << "warning: " << w << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------- plot data

namespace {

struct TreeRun {
    std::string cell, regime, mode;
    int n_seasons = 0;
    fs::path dir;
};

std::vector<TreeRun> completed_runs(const fs::path& tree) {
    std::vector<TreeRun> out;
    const auto m = read_json(tree / kManifestFile);
    for (const auto& run : m.at("runs")) {
        if (run.at("status").get<std::string>() != "complete") continue;
        out.push_back({run.at("cell").get<std::string>(), run.at("regime").get<std::string>(),
                       run.at("fitness_mode").get<std::string>(), run.at("n_seasons").get<int>(),
                       tree / run.at("dir").get<std::string>()});
    }
    return out;
}

}  // namespace

int emit_plotdata(const fs::path& dir, const std::vector<fs::path>& extra) {
    std::vector<FinalRow> finals;
    try {
        if (!fs::exists(dir / kFinalGenerationFile) || !fs::exists(dir / kManifestFile)) {
            std::cerr << "plotdata: " << dir.string() << " is not a finished experiment tree\n";
            return kExitAnalysisInputMissing;
        }
        finals = load_final(dir);
    } catch (const FormatVersionError& e) {
        std::cerr << "plotdata: " << e.what() << '\n';
        return kExitAnalysisInputMissing;
    }
    const fs::path out = dir / "plotdata";
    fs::create_directories(out);

    CsvWriter box(out / "boxplot.csv", {"cell", "regime", "n_seasons", "fitness_mode", "run", "metric", "value"});
    for (const auto& metric : kMetrics)
        for (const auto& r : finals) {
            const std::string cell = r.mode == "task" ? r.regime + "_s" + std::to_string(r.n_seasons)
                                                      : r.mode + "_s" + std::to_string(r.n_seasons);
            box.row({cell, r.regime, std::to_string(r.n_seasons), r.mode, std::to_string(r.run), metric,
                     format_real(r.metric.at(metric))});
        }

    CsvWriter traj(out / "trajectories.csv",
                   {"cell", "regime", "n_seasons", "fitness_mode", "generation", "metric", "mean", "std", "n_runs"});
    CsvWriter scatter(out / "scatter.csv", {"mode", "generation", "n_s", "n_c"});

    std::vector<fs::path> trees{dir};
    trees.insert(trees.end(), extra.begin(), extra.end());
    for (std::size_t ti = 0; ti < trees.size(); ++ti) {
        std::vector<TreeRun> runs;
        try {
            runs = completed_runs(trees[ti]);
        } catch (const std::exception& e) {
            std::cerr << "plotdata: " << trees[ti].string() << ": " << e.what() << '\n';
            return kExitAnalysisInputMissing;
        }
        // cell -> metric -> generation -> values
        std::map<std::string, std::map<std::string, std::map<int, std::vector<double>>>> series;
        std::map<std::string, TreeRun> cell_info;
        std::vector<std::string> cell_order;
        for (const auto& run : runs) {
            const CsvTable t = read_csv(run.dir / kRecordsFile);
            const std::size_t gi = t.column("generation"), si = t.column("best_n_s"), ci = t.column("best_n_c");
            for (const auto& rec : t.rows) {
                scatter.row({run.mode, rec[gi], rec[si], rec[ci]});
                if (ti != 0) continue;
                const int g = std::stoi(rec[gi]);
                for (const auto& [metric, column] : kTrendMetrics)
                    series[run.cell][metric][g].push_back(std::stod(rec[t.column(column)]));
            }
            if (!cell_info.contains(run.cell)) cell_order.push_back(run.cell);
            cell_info[run.cell] = run;
        }
        if (ti != 0) continue;
        for (const auto& cell : cell_order) {
            const auto& info = cell_info[cell];
            for (const auto& [metric, _] : kTrendMetrics)
                for (const auto& [g, vals] : series[cell][metric]) {
                    const double mu = mean_of(vals);
                    double ss = 0.0;
                    for (double v : vals) ss += (v - mu) * (v - mu);
                    const double sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
                    traj.row({cell, info.regime, std::to_string(info.n_seasons), info.mode, std::to_string(g), metric,
                              format_real(mu), format_real(sd), std::to_string(vals.size())});
                }
        }
    }
    return kExitOk;
}

}  // namespace evoforage
