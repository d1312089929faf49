#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace powergp {

// Both objectives are minimized. The id is the model's canonical string and
// doubles as the deterministic tie-breaker everywhere order matters.
struct ObjectivePoint {
    double rmse = 0.0;
    double f_complexity = 0.0;
    std::string id;
};

// a dominates b: no worse in both objectives, strictly better in at least one.
bool dominates(const ObjectivePoint& a, const ObjectivePoint& b);

// Fast non-dominated sorting (Deb et al. 2002). Returns fronts of indices into
// the input span; front 0 has no dominators.
std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const ObjectivePoint> points);

// Standard NSGA-II crowding distance within one front. Boundary points per
// objective get +inf; interior points accumulate normalized neighbor gaps.
// Equal objective values are ordered by id so the result is deterministic.
std::vector<double> crowding_distance(std::span<const ObjectivePoint> front);

// Archive row carrying the repeatability and error metrics used by the
// candidate filter.
struct CandidateEntry {
    ObjectivePoint objectives;
    int n_run = 0;
    double n_gen = 0.0;
    double mu_err = 0.0;
    double sigma_err = 0.0;
    double err_max = 0.0;
};

struct FilterThresholds {
    int min_n_run = 6;
    double max_err_max = 80.0; // percent
};

// Drops entries failing the repeatability/error thresholds, then keeps only
// the first non-dominated front of the survivors.
std::vector<CandidateEntry> filter_candidates(std::span<const CandidateEntry> entries,
                                              const FilterThresholds& thresholds = {});

} // namespace powergp
