#include "powergp/pareto.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace powergp {

bool dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
    if (a.rmse > b.rmse || a.f_complexity > b.f_complexity) return false;
    return a.rmse < b.rmse || a.f_complexity < b.f_complexity;
}

std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const ObjectivePoint> points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated_by(n); // i -> indices i dominates
    std::vector<std::size_t> domination_count(n, 0);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dominates(points[i], points[j])) {
                dominated_by[i].push_back(j);
                ++domination_count[j];
            } else if (dominates(points[j], points[i])) {
                dominated_by[j].push_back(i);
                ++domination_count[i];
            }
        }
    }

    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i) {
        if (domination_count[i] == 0) current.push_back(i);
    }
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (std::size_t i : current) {
            for (std::size_t j : dominated_by[i]) {
                if (--domination_count[j] == 0) next.push_back(j);
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

std::vector<double> crowding_distance(std::span<const ObjectivePoint> front) {
    const std::size_t n = front.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> distance(n, 0.0);
    if (n <= 2) {
        std::fill(distance.begin(), distance.end(), inf);
        return distance;
    }

    std::vector<std::size_t> order(n);
    auto accumulate_objective = [&](auto objective) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double va = objective(front[a]);
            const double vb = objective(front[b]);
            if (va != vb) return va < vb;
            return front[a].id < front[b].id;
        });
        const double lo = objective(front[order.front()]);
        const double hi = objective(front[order.back()]);
        distance[order.front()] = inf;
        distance[order.back()] = inf;
        if (hi == lo) return; // degenerate objective: no interior contribution
        for (std::size_t r = 1; r + 1 < n; ++r) {
            if (distance[order[r]] == inf) continue;
            distance[order[r]] +=
                (objective(front[order[r + 1]]) - objective(front[order[r - 1]])) / (hi - lo);
        }
    };
    accumulate_objective([](const ObjectivePoint& p) { return p.rmse; });
    accumulate_objective([](const ObjectivePoint& p) { return p.f_complexity; });
    return distance;
}

std::vector<CandidateEntry> filter_candidates(std::span<const CandidateEntry> entries,
                                              const FilterThresholds& thresholds) {
    std::vector<CandidateEntry> surviving;
    for (const CandidateEntry& entry : entries) {
        if (entry.n_run < thresholds.min_n_run) continue;
        if (entry.err_max > thresholds.max_err_max) continue;
        surviving.push_back(entry);
    }
    if (surviving.empty()) return surviving;

    std::vector<ObjectivePoint> points;
    points.reserve(surviving.size());
    for (const CandidateEntry& entry : surviving) points.push_back(entry.objectives);
    const auto fronts = non_dominated_sort(points);

    std::vector<CandidateEntry> result;
    result.reserve(fronts.front().size());
    for (std::size_t idx : fronts.front()) result.push_back(surviving[idx]);
    std::sort(result.begin(), result.end(), [](const CandidateEntry& a, const CandidateEntry& b) {
        if (a.objectives.rmse != b.objectives.rmse) {
            return a.objectives.rmse < b.objectives.rmse;
        }
        return a.objectives.id < b.objectives.id;
    });
    return result;
}

} // namespace powergp
