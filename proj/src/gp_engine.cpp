#include "powergp/gp_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "powergp/pareto.hpp"
#include "powergp/util.hpp"

namespace powergp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::map<std::string, UnaryOp>& unary_token_map() {
    static const std::map<std::string, UnaryOp> table = {
        {"neg", UnaryOp::Neg},   {"log", UnaryOp::Log},   {"exp", UnaryOp::Exp},
        {"atan", UnaryOp::Atan}, {"tanh", UnaryOp::Tanh}, {"sqrt", UnaryOp::Sqrt}};
    return table;
}

const std::map<std::string, BinaryOp>& binary_token_map() {
    static const std::map<std::string, BinaryOp> table = {{"add", BinaryOp::Add},
                                                          {"sub", BinaryOp::Sub},
                                                          {"mul", BinaryOp::Mul},
                                                          {"div", BinaryOp::Div},
                                                          {"pow", BinaryOp::Pow}};
    return table;
}

} // namespace

std::vector<UnaryOp> RunConfig::unary_ops() const {
    std::vector<UnaryOp> ops;
    for (const std::string& tok : non_terminals) {
        auto it = unary_token_map().find(tok);
        if (it != unary_token_map().end()) ops.push_back(it->second);
    }
    return ops;
}

std::vector<BinaryOp> RunConfig::binary_ops() const {
    std::vector<BinaryOp> ops;
    for (const std::string& tok : non_terminals) {
        auto it = binary_token_map().find(tok);
        if (it != binary_token_map().end()) ops.push_back(it->second);
    }
    return ops;
}

void validate(const RunConfig& config) {
    if (config.population_size < 2) {
        throw InvariantViolation("run config: population_size must be >= 2");
    }
    if (config.generations < 0) {
        throw InvariantViolation("run config: generations must be >= 0");
    }
    if (config.crossover_prob < 0 || config.crossover_prob > 1) {
        throw InvariantViolation("run config: crossover_prob must lie in [0, 1]");
    }
    if (config.mutation_prob < 0 || config.mutation_prob > 1) {
        throw InvariantViolation("run config: mutation_prob must lie in [0, 1]");
    }
    if (config.tournament_size < 1) {
        throw InvariantViolation("run config: tournament_size must be >= 1");
    }
    if (config.max_depth < 1) {
        throw InvariantViolation("run config: max_depth must be >= 1");
    }
    if (config.max_coefficients < 0) {
        throw InvariantViolation("run config: max_coefficients must be >= 0");
    }
    if (config.lm_max_iterations < 1) {
        throw InvariantViolation("run config: lm_max_iterations must be >= 1");
    }
    if (config.non_terminals.empty()) {
        throw InvariantViolation("run config: non_terminals must not be empty");
    }
    for (const std::string& tok : config.non_terminals) {
        if (unary_token_map().count(tok) == 0 && binary_token_map().count(tok) == 0) {
            throw InvariantViolation("run config: unknown non-terminal '" + tok + "'");
        }
    }
}

RunConfig parse_run_config(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("run config: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("run config must be a JSON object");
    }
    const std::set<std::string> known = {
        "population_size", "generations",   "crossover_prob",    "mutation_prob",
        "tournament_size", "max_depth",     "max_coefficients",  "rng_seed",
        "non_terminals",   "lm_max_iterations"};
    for (const auto& [key, value] : doc.items()) {
        if (key == "notes") continue;
        if (known.count(key) == 0) {
            throw ParseError("run config has unknown key '" + key + "'");
        }
    }
    RunConfig config;
    try {
        if (doc.contains("population_size")) config.population_size = doc["population_size"].get<int>();
        if (doc.contains("generations")) config.generations = doc["generations"].get<int>();
        if (doc.contains("crossover_prob")) config.crossover_prob = doc["crossover_prob"].get<double>();
        if (doc.contains("mutation_prob")) config.mutation_prob = doc["mutation_prob"].get<double>();
        if (doc.contains("tournament_size")) config.tournament_size = doc["tournament_size"].get<int>();
        if (doc.contains("max_depth")) config.max_depth = doc["max_depth"].get<int>();
        if (doc.contains("max_coefficients")) config.max_coefficients = doc["max_coefficients"].get<int>();
        if (doc.contains("rng_seed")) config.rng_seed = doc["rng_seed"].get<std::uint64_t>();
        if (doc.contains("lm_max_iterations")) config.lm_max_iterations = doc["lm_max_iterations"].get<int>();
        if (doc.contains("non_terminals")) {
            config.non_terminals = doc["non_terminals"].get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("run config: ") + e.what());
    }
    validate(config);
    return config;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Tree navigation helpers (pre-order indexing, root = 0)
// ---------------------------------------------------------------------------

namespace {

struct NodeInfo {
    NodePtr node;
    int depth = 1;        // root = 1
    bool in_exponent = false; // somewhere under the right child of a Pow
    int height = 1;       // subtree height, leaf = 1
};

int collect_infos(const NodePtr& n, int depth, bool in_exponent, std::vector<NodeInfo>& out) {
    const std::size_t my = out.size();
    out.push_back({n, depth, in_exponent, 1});
    int height = 1;
    switch (n->kind) {
    case Node::Kind::Variable:
    case Node::Kind::Coefficient:
        break;
    case Node::Kind::Unary:
        height = 1 + collect_infos(n->a, depth + 1, in_exponent, out);
        break;
    case Node::Kind::Binary: {
        const int hl = collect_infos(n->a, depth + 1, in_exponent, out);
        const bool rhs_exponent = in_exponent || n->bop == BinaryOp::Pow;
        const int hr = collect_infos(n->b, depth + 1, rhs_exponent, out);
        height = 1 + std::max(hl, hr);
        break;
    }
    }
    out[my].height = height;
    return height;
}

std::vector<NodeInfo> node_infos(const NodePtr& root) {
    std::vector<NodeInfo> infos;
    collect_infos(root, 1, false, infos);
    return infos;
}

NodePtr replace_at(const NodePtr& node, int target, const NodePtr& replacement, int& next) {
    const int my = next++;
    if (my == target) return replacement;
    switch (node->kind) {
    case Node::Kind::Variable:
    case Node::Kind::Coefficient:
        return node;
    case Node::Kind::Unary: {
        NodePtr child = replace_at(node->a, target, replacement, next);
        return child == node->a ? node : make_unary(node->uop, child);
    }
    case Node::Kind::Binary: {
        NodePtr lhs = replace_at(node->a, target, replacement, next);
        NodePtr rhs = replace_at(node->b, target, replacement, next);
        return (lhs == node->a && rhs == node->b) ? node : make_binary(node->bop, lhs, rhs);
    }
    }
    return node;
}

NodePtr replace_subtree(const NodePtr& root, int target, const NodePtr& replacement) {
    int next = 0;
    return replace_at(root, target, replacement, next);
}

NodePtr renumber_fresh_node(const NodePtr& n, int& next) {
    switch (n->kind) {
    case Node::Kind::Variable:
        return n;
    case Node::Kind::Coefficient: {
        const int index = next++;
        return index == n->coeff ? n : make_coeff(index);
    }
    case Node::Kind::Unary: {
        NodePtr child = renumber_fresh_node(n->a, next);
        return child == n->a ? n : make_unary(n->uop, child);
    }
    case Node::Kind::Binary: {
        NodePtr lhs = renumber_fresh_node(n->a, next);
        NodePtr rhs = renumber_fresh_node(n->b, next);
        return (lhs == n->a && rhs == n->b) ? n : make_binary(n->bop, lhs, rhs);
    }
    }
    return n;
}

// Gives every coefficient node its own placeholder index, in pre-order.
Expr renumber_fresh(const NodePtr& root) {
    int next = 0;
    return Expr(renumber_fresh_node(root, next));
}

int count_coeff_nodes(const Node* n) {
    switch (n->kind) {
    case Node::Kind::Variable:
        return 0;
    case Node::Kind::Coefficient:
        return 1;
    case Node::Kind::Unary:
        return count_coeff_nodes(n->a.get());
    case Node::Kind::Binary:
        return count_coeff_nodes(n->a.get()) + count_coeff_nodes(n->b.get());
    }
    return 0;
}

bool has_variable(const Node* n) {
    switch (n->kind) {
    case Node::Kind::Variable:
        return true;
    case Node::Kind::Coefficient:
        return false;
    case Node::Kind::Unary:
        return has_variable(n->a.get());
    case Node::Kind::Binary:
        return has_variable(n->a.get()) || has_variable(n->b.get());
    }
    return false;
}

NodePtr random_variable(Rng& rng) {
    return make_var(kAllVars[rng.uniform(kAllVars.size())]);
}

// Grow/full tree generation with a shared coefficient budget. Pow exponents
// are always a single fresh coefficient, so Pow is only offered while the
// budget allows it.
NodePtr gen_tree(int remaining, bool full, int& coeff_budget,
                 const std::vector<UnaryOp>& uops, const std::vector<BinaryOp>& bops,
                 Rng& rng) {
    auto terminal = [&]() -> NodePtr {
        if (coeff_budget > 0 && rng.uniform(4) == 0) {
            --coeff_budget;
            return make_coeff(0); // placeholder; renumbered afterwards
        }
        return random_variable(rng);
    };
    if (remaining <= 1) return terminal();
    if (!full && rng.bernoulli(0.3)) return terminal();

    // Filter Pow out when the exponent coefficient cannot be afforded.
    std::vector<BinaryOp> filtered;
    for (BinaryOp op : bops) {
        if (op == BinaryOp::Pow && coeff_budget == 0) continue;
        filtered.push_back(op);
    }
    const std::size_t total = uops.size() + filtered.size();
    if (total == 0) return terminal();
    const std::size_t pick = rng.uniform(total);
    if (pick < uops.size()) {
        return make_unary(uops[pick], gen_tree(remaining - 1, full, coeff_budget, uops, bops, rng));
    }
    const BinaryOp op = filtered[pick - uops.size()];
    if (op == BinaryOp::Pow) {
        --coeff_budget;
        NodePtr base = gen_tree(remaining - 1, full, coeff_budget, uops, bops, rng);
        return make_binary(BinaryOp::Pow, base, make_coeff(0));
    }
    NodePtr lhs = gen_tree(remaining - 1, full, coeff_budget, uops, bops, rng);
    NodePtr rhs = gen_tree(remaining - 1, full, coeff_budget, uops, bops, rng);
    return make_binary(op, lhs, rhs);
}

} // namespace

Expr random_tree(const RunConfig& config, Rng& rng) {
    const auto uops = config.unary_ops();
    const auto bops = config.binary_ops();
    int target = 1;
    if (config.max_depth > 1) {
        target = 2 + static_cast<int>(rng.uniform(static_cast<std::uint64_t>(config.max_depth - 1)));
    }
    const bool full = rng.bernoulli(0.5);
    int budget = config.max_coefficients;
    NodePtr root = gen_tree(target, full, budget, uops, bops, rng);

    if (!has_variable(root.get())) {
        // Swap one non-exponent leaf for a variable; the leftmost spine is
        // never inside a Pow exponent, so such a leaf always exists.
        auto infos = node_infos(root);
        std::vector<int> leaves;
        for (std::size_t i = 0; i < infos.size(); ++i) {
            const auto kind = infos[i].node->kind;
            if ((kind == Node::Kind::Variable || kind == Node::Kind::Coefficient) &&
                !infos[i].in_exponent) {
                leaves.push_back(static_cast<int>(i));
            }
        }
        const int slot = leaves[rng.uniform(leaves.size())];
        root = replace_subtree(root, slot, random_variable(rng));
    }
    return renumber_fresh(root);
}

namespace {

// Restores validity after a subtree transplant: if a limit broke, the
// transplanted subtree collapses to a terminal (a coefficient inside Pow
// exponents, a variable elsewhere).
Expr repair_offspring(const NodePtr& root, int slot, bool slot_in_exponent,
                      const RunConfig& config, Rng& rng) {
    Expr candidate = renumber_fresh(root);
    if (config.limits().admits(candidate)) return candidate;
    NodePtr terminal = slot_in_exponent ? NodePtr(make_coeff(0)) : random_variable(rng);
    return renumber_fresh(replace_subtree(root, slot, terminal));
}

} // namespace

std::pair<Expr, Expr> crossover(const Expr& a, const Expr& b,
                                const RunConfig& config, Rng& rng) {
    const auto infos_a = node_infos(a.root());
    const auto infos_b = node_infos(b.root());
    const int slot_a = static_cast<int>(rng.uniform(infos_a.size()));
    const int slot_b = static_cast<int>(rng.uniform(infos_b.size()));

    NodePtr child_a = replace_subtree(a.root(), slot_a, infos_b[slot_b].node);
    NodePtr child_b = replace_subtree(b.root(), slot_b, infos_a[slot_a].node);

    Expr out_a = repair_offspring(child_a, slot_a, infos_a[slot_a].in_exponent, config, rng);
    Expr out_b = repair_offspring(child_b, slot_b, infos_b[slot_b].in_exponent, config, rng);
    return {std::move(out_a), std::move(out_b)};
}

Expr mutate(const Expr& e, const RunConfig& config, Rng& rng) {
    const auto uops = config.unary_ops();
    const auto bops = config.binary_ops();
    const auto infos = node_infos(e.root());
    const int total_coeffs = count_coeff_nodes(e.root().get());

    const std::uint64_t kind = rng.uniform(3);

    if (kind == 0) {
        // Subtree replacement.
        const int slot = static_cast<int>(rng.uniform(infos.size()));
        NodePtr replacement;
        if (infos[slot].in_exponent) {
            replacement = make_coeff(0);
        } else {
            const int depth_budget = config.max_depth - infos[slot].depth + 1;
            int coeff_budget = config.max_coefficients -
                               (total_coeffs - count_coeff_nodes(infos[slot].node.get()));
            if (coeff_budget < 0) coeff_budget = 0;
            const int target =
                1 + static_cast<int>(rng.uniform(static_cast<std::uint64_t>(std::max(1, depth_budget))));
            replacement = gen_tree(std::min(target, depth_budget), false, coeff_budget,
                                   uops, bops, rng);
        }
        Expr candidate = renumber_fresh(replace_subtree(e.root(), slot, replacement));
        if (config.limits().admits(candidate)) return candidate;
        return renumber_fresh(e.root());
    }

    if (kind == 1) {
        // Operator substitution of matching arity.
        std::vector<int> internal;
        for (std::size_t i = 0; i < infos.size(); ++i) {
            const auto k = infos[i].node->kind;
            if (k == Node::Kind::Unary || k == Node::Kind::Binary) {
                internal.push_back(static_cast<int>(i));
            }
        }
        if (internal.empty()) return renumber_fresh(e.root()); // identity on terminals
        const int slot = internal[rng.uniform(internal.size())];
        const NodePtr& node = infos[slot].node;
        if (node->kind == Node::Kind::Unary) {
            std::vector<UnaryOp> candidates;
            for (UnaryOp op : uops) {
                if (op != node->uop) candidates.push_back(op);
            }
            if (candidates.empty()) return renumber_fresh(e.root());
            const UnaryOp op = candidates[rng.uniform(candidates.size())];
            return renumber_fresh(
                replace_subtree(e.root(), slot, make_unary(op, node->a)));
        }
        std::vector<BinaryOp> candidates;
        for (BinaryOp op : bops) {
            if (op == node->bop) continue;
            if (op == BinaryOp::Pow && has_variable(node->b.get())) continue;
            candidates.push_back(op);
        }
        if (candidates.empty()) return renumber_fresh(e.root());
        const BinaryOp op = candidates[rng.uniform(candidates.size())];
        return renumber_fresh(
            replace_subtree(e.root(), slot, make_binary(op, node->a, node->b)));
    }

    // Coefficient insertion / removal.
    const bool prefer_insert = rng.bernoulli(0.5);
    auto try_insert = [&]() -> Expr {
        if (total_coeffs >= config.max_coefficients) return Expr{};
        std::vector<int> wrappable;
        for (std::size_t i = 0; i < infos.size(); ++i) {
            if (infos[i].depth + infos[i].height <= config.max_depth) {
                wrappable.push_back(static_cast<int>(i));
            }
        }
        if (wrappable.empty()) return Expr{};
        const int slot = wrappable[rng.uniform(wrappable.size())];
        NodePtr wrapped = make_binary(BinaryOp::Mul, make_coeff(0), infos[slot].node);
        return renumber_fresh(replace_subtree(e.root(), slot, wrapped));
    };
    auto try_remove = [&]() -> Expr {
        std::vector<int> removable;
        for (std::size_t i = 0; i < infos.size(); ++i) {
            if (infos[i].node->kind == Node::Kind::Coefficient && !infos[i].in_exponent) {
                removable.push_back(static_cast<int>(i));
            }
        }
        if (removable.empty()) return Expr{};
        const int slot = removable[rng.uniform(removable.size())];
        return renumber_fresh(replace_subtree(e.root(), slot, random_variable(rng)));
    };

    Expr mutated = prefer_insert ? try_insert() : try_remove();
    if (mutated.empty()) mutated = prefer_insert ? try_remove() : try_insert();
    if (mutated.empty()) return renumber_fresh(e.root());
    if (!config.limits().admits(mutated)) return renumber_fresh(e.root());
    return mutated;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

const ScoredModel& score_model(const Expr& e, const TrainingSet& training,
                               const RunConfig& config, ScoreCache& cache) {
    Expr canon = canonicalize(e);
    std::string key = serialize(canon);
    if (auto it = cache.find(key); it != cache.end()) {
        return it->second;
    }

    ScoredModel sm;
    sm.expr = canon;
    sm.key = key;
    sm.f_complexity = complexity(canon);

    const int n_coeff = canon.coefficient_count();
    FitOptions options;
    options.max_iterations = config.lm_max_iterations;

    std::vector<double> fs_col, vin_col, d_col, rt_col;
    std::vector<double> chis;
    bool usable = true;
    for (std::size_t j = 0; j < training.m(); ++j) {
        ConditionData data = condition_slice(training, j, fs_col, vin_col, d_col, rt_col);
        try {
            std::vector<double> start(static_cast<std::size_t>(n_coeff), 1.0);
            ConditionFit fit = nlls_fit(canon, data, start, options);
            if (!fit.converged) {
                // Second start at 1e-6 covers the scale gap between unit
                // coefficients and loss magnitudes.
                std::vector<double> small(static_cast<std::size_t>(n_coeff), 1e-6);
                ConditionFit retry = nlls_fit(canon, data, small, options);
                const bool take_retry = (retry.converged && !fit.converged) ||
                                        (retry.converged == fit.converged &&
                                         retry.chi_sq < fit.chi_sq);
                if (take_retry) fit = retry;
            }
            fit.condition_index = j;
            chis.push_back(fit.chi_sq);
            sm.fits.push_back(std::move(fit));
        } catch (const Error&) {
            usable = false;
            break;
        }
    }
    if (usable) {
        const double value = rmse(chis);
        if (std::isfinite(value)) {
            sm.rmse = value;
        } else {
            usable = false;
        }
    }
    if (usable) {
        try {
            const ErrorStats stats = percent_errors(canon, sm.fits, training);
            sm.mu_err = stats.mu_err;
            sm.sigma_err = stats.sigma_err;
            sm.err_max = stats.err_max;
        } catch (const Error&) {
            sm.err_max = kInf; // fit excluded points the stat pass cannot skip
        }
    } else {
        sm.rmse = kInf;
        sm.err_max = kInf;
        sm.fits.clear();
    }
    return cache.emplace(std::move(key), std::move(sm)).first->second;
}

// ---------------------------------------------------------------------------
// Evolution loop
// ---------------------------------------------------------------------------

namespace {

bool tournament_better(const Individual& a, const Individual& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    if (a.crowding != b.crowding) return a.crowding > b.crowding;
    return a.key < b.key;
}

const Individual& tournament(const std::vector<Individual>& pop, const RunConfig& config,
                             Rng& rng) {
    std::size_t best = rng.uniform(pop.size());
    for (int t = 1; t < config.tournament_size; ++t) {
        const std::size_t challenger = rng.uniform(pop.size());
        if (tournament_better(pop[challenger], pop[best])) best = challenger;
    }
    return pop[best];
}

// mu+lambda environmental selection with NSGA-II ranking. Individuals with
// the +inf sentinel never enter the fronts; they fill trailing slots only
// when the finite pool runs short.
std::vector<Individual> environmental_selection(std::vector<Individual> combined,
                                                std::size_t target) {
    std::vector<std::size_t> finite_idx;
    std::vector<std::size_t> sentinel_idx;
    for (std::size_t i = 0; i < combined.size(); ++i) {
        (std::isfinite(combined[i].rmse) ? finite_idx : sentinel_idx).push_back(i);
    }

    std::vector<ObjectivePoint> points;
    points.reserve(finite_idx.size());
    for (std::size_t idx : finite_idx) {
        points.push_back({combined[idx].rmse, combined[idx].f_complexity, combined[idx].key});
    }
    const auto fronts = non_dominated_sort(points);

    std::vector<Individual> next;
    next.reserve(target);
    int rank = 0;
    for (const auto& front : fronts) {
        if (next.size() >= target) break;
        std::vector<ObjectivePoint> front_points;
        front_points.reserve(front.size());
        for (std::size_t member : front) front_points.push_back(points[member]);
        const auto distance = crowding_distance(front_points);

        if (next.size() + front.size() <= target) {
            for (std::size_t r = 0; r < front.size(); ++r) {
                Individual ind = combined[finite_idx[front[r]]];
                ind.rank = rank;
                ind.crowding = distance[r];
                next.push_back(std::move(ind));
            }
        } else {
            std::vector<std::size_t> order(front.size());
            for (std::size_t r = 0; r < front.size(); ++r) order[r] = r;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                if (distance[x] != distance[y]) return distance[x] > distance[y];
                return front_points[x].id < front_points[y].id;
            });
            for (std::size_t r = 0; r < order.size() && next.size() < target; ++r) {
                Individual ind = combined[finite_idx[front[order[r]]]];
                ind.rank = rank;
                ind.crowding = distance[order[r]];
                next.push_back(std::move(ind));
            }
        }
        ++rank;
    }

    if (next.size() < target) {
        std::stable_sort(sentinel_idx.begin(), sentinel_idx.end(),
                         [&](std::size_t x, std::size_t y) {
                             return combined[x].key < combined[y].key;
                         });
        for (std::size_t idx : sentinel_idx) {
            if (next.size() >= target) break;
            Individual ind = combined[idx];
            ind.rank = static_cast<int>(fronts.size());
            ind.crowding = 0.0;
            next.push_back(std::move(ind));
        }
    }
    return next;
}

GenerationLog log_generation(int generation, const std::vector<Individual>& pop) {
    std::map<std::string, LogRecord> present;
    for (const Individual& ind : pop) {
        present.emplace(ind.key, LogRecord{ind.key, ind.rmse, ind.f_complexity});
    }
    GenerationLog log;
    log.generation = generation;
    log.present.reserve(present.size());
    for (auto& [key, record] : present) log.present.push_back(std::move(record));
    return log;
}

} // namespace

RunResult evolve(const RunConfig& config, const TrainingSet& training) {
    validate(config);
    if (training.n() == 0 || training.m() == 0) {
        throw InvariantViolation("evolve: training set is empty");
    }

    Rng rng(config.rng_seed);
    ScoreCache cache;

    auto make_individual = [&](const Expr& raw, int generation) {
        const ScoredModel& sm = score_model(raw, training, config, cache);
        Individual ind;
        ind.expr = sm.expr;
        ind.key = sm.key;
        ind.rmse = sm.rmse;
        ind.f_complexity = sm.f_complexity;
        ind.birth_generation = generation;
        return ind;
    };

    std::vector<Individual> population;
    population.reserve(static_cast<std::size_t>(config.population_size));
    for (int i = 0; i < config.population_size; ++i) {
        population.push_back(make_individual(random_tree(config, rng), 0));
    }
    population = environmental_selection(std::move(population),
                                         static_cast<std::size_t>(config.population_size));

    RunResult result;
    result.config = config;
    result.log.push_back(log_generation(0, population));

    for (int gen = 1; gen <= config.generations; ++gen) {
        std::vector<Individual> offspring;
        offspring.reserve(static_cast<std::size_t>(config.population_size));
        while (offspring.size() < static_cast<std::size_t>(config.population_size)) {
            const Individual& parent_a = tournament(population, config, rng);
            const Individual& parent_b = tournament(population, config, rng);
            Expr child_a = parent_a.expr;
            Expr child_b = parent_b.expr;
            if (rng.bernoulli(config.crossover_prob)) {
                auto [xa, xb] = crossover(child_a, child_b, config, rng);
                child_a = std::move(xa);
                child_b = std::move(xb);
            }
            if (rng.bernoulli(config.mutation_prob)) child_a = mutate(child_a, config, rng);
            if (rng.bernoulli(config.mutation_prob)) child_b = mutate(child_b, config, rng);
            offspring.push_back(make_individual(child_a, gen));
            if (offspring.size() < static_cast<std::size_t>(config.population_size)) {
                offspring.push_back(make_individual(child_b, gen));
            }
        }
        std::vector<Individual> combined = population;
        combined.insert(combined.end(), std::make_move_iterator(offspring.begin()),
                        std::make_move_iterator(offspring.end()));
        population = environmental_selection(std::move(combined),
                                             static_cast<std::size_t>(config.population_size));
        result.log.push_back(log_generation(gen, population));
    }

    result.population = population;
    for (const GenerationLog& gl : result.log) {
        for (const LogRecord& record : gl.present) {
            if (result.models.count(record.key) != 0) continue;
            const auto it = cache.find(record.key);
            if (it != cache.end()) {
                const ScoredModel& sm = it->second;
                result.models[record.key] =
                    {sm.rmse, sm.f_complexity, sm.mu_err, sm.sigma_err, sm.err_max};
            } else {
                result.models[record.key] = {record.rmse, record.f_complexity, 0.0, 0.0, kInf};
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Multi-run archive
// ---------------------------------------------------------------------------

ModelArchive merge_runs(std::span<const RunResult> runs) {
    std::map<std::string, ArchiveEntry> accumulator;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        std::map<std::string, int> presence;
        std::map<std::string, ModelInfo> info;
        for (const GenerationLog& gl : runs[r].log) {
            for (const LogRecord& record : gl.present) {
                presence[record.key] += 1;
                auto it = runs[r].models.find(record.key);
                if (it != runs[r].models.end()) {
                    info[record.key] = it->second;
                } else if (info.count(record.key) == 0) {
                    info[record.key] = {record.rmse, record.f_complexity, 0.0, 0.0, kInf};
                }
            }
        }
        for (const auto& [key, count] : presence) {
            ArchiveEntry& entry = accumulator[key];
            const ModelInfo& model = info.at(key);
            if (entry.n_run == 0 || model.rmse < entry.rmse) {
                entry.rmse = model.rmse;
                entry.f_complexity = model.f_complexity;
                entry.mu_err = model.mu_err;
                entry.sigma_err = model.sigma_err;
                entry.err_max = model.err_max;
            }
            entry.key = key;
            entry.n_run += 1;
            entry.presence.emplace_back(static_cast<int>(r), count);
        }
    }

    ModelArchive archive;
    archive.runs_executed = static_cast<int>(runs.size());
    archive.entries.reserve(accumulator.size());
    for (auto& [key, entry] : accumulator) {
        double total = 0.0;
        for (const auto& [run, count] : entry.presence) total += count;
        entry.n_gen = total / static_cast<double>(entry.presence.size());
        archive.entries.push_back(std::move(entry));
    }
    std::sort(archive.entries.begin(), archive.entries.end(),
              [](const ArchiveEntry& a, const ArchiveEntry& b) {
                  if (a.n_run != b.n_run) return a.n_run > b.n_run;
                  if (a.rmse != b.rmse) return a.rmse < b.rmse;
                  return a.key < b.key;
              });
    return archive;
}

ModelArchive multi_run(std::span<const RunConfig> configs, const TrainingSet& training,
                       int parallel, const RunCallback& on_run_complete) {
    if (configs.empty()) {
        throw InvariantViolation("multi_run: need at least one run config");
    }
    std::set<std::uint64_t> seeds;
    for (const RunConfig& config : configs) {
        if (!seeds.insert(config.rng_seed).second) {
            throw InvariantViolation("multi_run: duplicate seed " +
                                     std::to_string(config.rng_seed));
        }
    }

    std::vector<RunResult> results(configs.size());
    const int workers = std::max(1, std::min<int>(parallel, static_cast<int>(configs.size())));
    std::mutex callback_mutex;
    auto complete = [&](std::size_t i) {
        if (!on_run_complete) return;
        std::lock_guard<std::mutex> lock(callback_mutex);
        on_run_complete(results[i], i);
    };
    if (workers == 1) {
        for (std::size_t i = 0; i < configs.size(); ++i) {
            results[i] = evolve(configs[i], training);
            complete(i);
        }
    } else {
        std::atomic<std::size_t> cursor{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&]() {
            while (true) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= configs.size()) break;
                try {
                    results[i] = evolve(configs[i], training);
                    complete(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    break;
                }
            }
        };
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    return merge_runs(results);
}

// ---------------------------------------------------------------------------
// Log and archive persistence
// ---------------------------------------------------------------------------

void save_run_log(const RunResult& run, const std::string& path) {
    std::ostringstream out;
    out << "# powergp-run-log v1\n";
    out << "# seed " << run.config.rng_seed << '\n';
    out << "generation\trmse\tf_complexity\tmodel\n";
    for (const GenerationLog& gl : run.log) {
        for (const LogRecord& record : gl.present) {
            out << gl.generation << '\t' << g17(record.rmse) << '\t'
                << g17(record.f_complexity) << '\t' << record.key << '\n';
        }
    }
    write_text_file(path, out.str());
}

std::vector<GenerationLog> load_run_log(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "# powergp-run-log v1") {
        throw FormatError("run log '" + path + "': missing magic header");
    }
    if (!std::getline(in, line) || line.rfind("# seed ", 0) != 0) {
        throw FormatError("run log '" + path + "': missing seed header");
    }
    if (!std::getline(in, line) || line != "generation\trmse\tf_complexity\tmodel") {
        throw FormatError("run log '" + path + "': missing column header");
    }
    std::vector<GenerationLog> logs;
    std::size_t line_no = 3;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t t1 = line.find('\t');
        std::size_t t2 = (t1 == std::string::npos) ? std::string::npos : line.find('\t', t1 + 1);
        std::size_t t3 = (t2 == std::string::npos) ? std::string::npos : line.find('\t', t2 + 1);
        if (t3 == std::string::npos) {
            throw FormatError("run log line " + std::to_string(line_no) + ": expected 4 fields");
        }
        const int generation = static_cast<int>(
            parse_double_strict(line.substr(0, t1), "run log generation"));
        LogRecord record;
        record.rmse = parse_double_strict(line.substr(t1 + 1, t2 - t1 - 1), "run log rmse");
        record.f_complexity =
            parse_double_strict(line.substr(t2 + 1, t3 - t2 - 1), "run log f_complexity");
        record.key = line.substr(t3 + 1);
        if (logs.empty() || logs.back().generation != generation) {
            GenerationLog gl;
            gl.generation = generation;
            logs.push_back(std::move(gl));
        }
        logs.back().present.push_back(std::move(record));
    }
    return logs;
}

namespace {

nlohmann::json number_or_tag(double value) {
    if (std::isfinite(value)) return value;
    return value > 0 ? "inf" : "-inf";
}

double tagged_number(const nlohmann::json& value, const char* what) {
    if (value.is_number()) return value.get<double>();
    if (value.is_string()) {
        const auto text = value.get<std::string>();
        if (text == "inf") return kInf;
        if (text == "-inf") return -kInf;
    }
    throw ParseError(std::string("archive: bad numeric field '") + what + "'");
}

} // namespace

void save_archive(const ModelArchive& archive, const std::string& path) {
    nlohmann::json doc;
    doc["format"] = "powergp-archive v1";
    doc["runs_executed"] = archive.runs_executed;
    nlohmann::json models = nlohmann::json::array();
    for (const ArchiveEntry& entry : archive.entries) {
        nlohmann::json row;
        row["model"] = entry.key;
        row["n_run"] = entry.n_run;
        row["n_gen"] = entry.n_gen;
        row["rmse"] = number_or_tag(entry.rmse);
        row["f_complexity"] = entry.f_complexity;
        row["mu_err"] = number_or_tag(entry.mu_err);
        row["sigma_err"] = number_or_tag(entry.sigma_err);
        row["err_max"] = number_or_tag(entry.err_max);
        nlohmann::json presence = nlohmann::json::array();
        for (const auto& [run, count] : entry.presence) {
            presence.push_back({run, count});
        }
        row["presence"] = presence;
        models.push_back(row);
    }
    doc["models"] = models;
    write_text_file(path, doc.dump(2) + "\n");
}

ModelArchive load_archive(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("archive '" + path + "': " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "powergp-archive v1") {
            throw ParseError("archive '" + path + "': unknown format tag");
        }
        ModelArchive archive;
        archive.runs_executed = doc.at("runs_executed").get<int>();
        for (const auto& row : doc.at("models")) {
            ArchiveEntry entry;
            entry.key = row.at("model").get<std::string>();
            entry.n_run = row.at("n_run").get<int>();
            entry.n_gen = row.at("n_gen").get<double>();
            entry.rmse = tagged_number(row.at("rmse"), "rmse");
            entry.f_complexity = row.at("f_complexity").get<double>();
            entry.mu_err = tagged_number(row.at("mu_err"), "mu_err");
            entry.sigma_err = tagged_number(row.at("sigma_err"), "sigma_err");
            entry.err_max = tagged_number(row.at("err_max"), "err_max");
            for (const auto& pair : row.at("presence")) {
                entry.presence.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
            }
            archive.entries.push_back(std::move(entry));
        }
        return archive;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("archive '" + path + "': " + e.what());
    }
}

} // namespace powergp
