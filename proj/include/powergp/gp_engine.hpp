#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "powergp/dataset.hpp"
#include "powergp/expression.hpp"
#include "powergp/fitting.hpp"
#include "powergp/rng.hpp"

namespace powergp {

struct RunConfig {
    int population_size = 200;
    int generations = 60;
    double crossover_prob = 0.85;
    double mutation_prob = 0.15;
    int tournament_size = 2;
    int max_depth = 8;
    int max_coefficients = 6;
    std::uint64_t rng_seed = 1;
    // Enabled non-terminal tokens; pow exponents stay coefficient-only.
    std::vector<std::string> non_terminals = {"add", "sub", "mul", "div", "log",
                                              "exp", "tanh", "atan", "sqrt", "pow"};
    int lm_max_iterations = 80;

    [[nodiscard]] ExprLimits limits() const {
        return ExprLimits{max_depth, max_coefficients, false};
    }
    [[nodiscard]] std::vector<UnaryOp> unary_ops() const;
    [[nodiscard]] std::vector<BinaryOp> binary_ops() const;
};

void validate(const RunConfig& config);
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Ramped half-and-half generation within the config limits; every tree
// contains at least one input variable.
Expr random_tree(const RunConfig& config, Rng& rng);

// Uniform subtree exchange. Offspring breaking a limit are repaired by
// replacing the transplanted subtree with a random terminal; coefficient
// placeholders are renumbered afresh so parents' indices never alias.
std::pair<Expr, Expr> crossover(const Expr& a, const Expr& b,
                                const RunConfig& config, Rng& rng);

// One of: subtree replacement, operator substitution of matching arity,
// coefficient insertion/removal. Falls back to the identity when the drawn
// mutation is inapplicable.
Expr mutate(const Expr& e, const RunConfig& config, Rng& rng);

struct ScoredModel {
    Expr expr; // canonical
    std::string key;
    std::vector<ConditionFit> fits;
    double rmse = 0.0; // +inf sentinel when the model is not evaluable
    double f_complexity = 0.0;
    double mu_err = 0.0;
    double sigma_err = 0.0;
    double err_max = 0.0;
};

using ScoreCache = std::unordered_map<std::string, ScoredModel>;

// Fits the model per condition (Levenberg-Marquardt from all-ones, one retry
// from 1e-6 when unconverged), aggregates RMSE and complexity, and caches the
// result under the canonical string.
const ScoredModel& score_model(const Expr& e, const TrainingSet& training,
                               const RunConfig& config, ScoreCache& cache);

struct Individual {
    Expr expr; // canonical
    std::string key;
    double rmse = 0.0;
    double f_complexity = 0.0;
    int rank = 0;
    double crowding = 0.0;
    int birth_generation = 0;
};

struct LogRecord {
    std::string key;
    double rmse = 0.0;
    double f_complexity = 0.0;
};

struct GenerationLog {
    int generation = 0;
    std::vector<LogRecord> present; // distinct keys, sorted
};

struct ModelInfo {
    double rmse = 0.0;
    double f_complexity = 0.0;
    double mu_err = 0.0;
    double sigma_err = 0.0;
    double err_max = 0.0;
};

struct RunResult {
    RunConfig config;
    std::vector<Individual> population; // final generation
    std::vector<GenerationLog> log;     // generations 0..G
    std::unordered_map<std::string, ModelInfo> models; // every logged key
};

// NSGA-II generational loop: binary tournament on (rank, crowding), subtree
// crossover and mutation, mu+lambda environmental selection. Deterministic
// for a fixed seed.
RunResult evolve(const RunConfig& config, const TrainingSet& training);

struct ArchiveEntry {
    std::string key;
    int n_run = 0;      // runs in which the model appeared in some generation
    double n_gen = 0.0; // mean generations present, over those runs
    double rmse = 0.0;
    double f_complexity = 0.0;
    double mu_err = 0.0;
    double sigma_err = 0.0;
    double err_max = 0.0;
    std::vector<std::pair<int, int>> presence; // (run index, generations present)
};

struct ModelArchive {
    int runs_executed = 0;
    std::vector<ArchiveEntry> entries; // sorted by n_run desc
};

// Invoked (serialized) as each run completes; lets callers persist partial
// results before the merge.
using RunCallback = std::function<void(const RunResult&, std::size_t)>;

// Runs every config (seeds must differ) and merges the per-run logs; archive
// contents do not depend on the thread count.
ModelArchive multi_run(std::span<const RunConfig> configs, const TrainingSet& training,
                       int parallel = 1, const RunCallback& on_run_complete = {});

// Merge already-executed run logs; exposed so the archive arithmetic can be
// tested on constructed logs.
ModelArchive merge_runs(std::span<const RunResult> runs);

void save_run_log(const RunResult& run, const std::string& path);
// Reads back (generation, key, objectives) triples; used by tooling and tests.
std::vector<GenerationLog> load_run_log(const std::string& path);

void save_archive(const ModelArchive& archive, const std::string& path);
ModelArchive load_archive(const std::string& path);

} // namespace powergp
