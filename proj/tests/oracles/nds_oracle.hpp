#pragma once

// O(n^3) reference for non-dominated sorting over 2-objective minimization:
// repeatedly peel off the set of points not dominated by any remaining point.
// Used only to cross-check pareto::non_dominated_sort.

#include <cstddef>
#include <utility>
#include <vector>

namespace oracle {

inline bool strictly_dominates(const std::pair<double, double>& a,
                               const std::pair<double, double>& b) {
    return a.first <= b.first && a.second <= b.second &&
           (a.first < b.first || a.second < b.second);
}

inline std::vector<std::vector<std::size_t>>
brute_force_fronts(const std::vector<std::pair<double, double>>& points) {
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<bool> assigned(points.size(), false);
    std::size_t remaining = points.size();
    while (remaining > 0) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (assigned[i]) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < points.size(); ++j) {
                if (j == i || assigned[j]) continue;
                if (strictly_dominates(points[j], points[i])) {
                    dominated = true;
                    break;
                }
            }
            if (!dominated) front.push_back(i);
        }
        for (std::size_t idx : front) assigned[idx] = true;
        remaining -= front.size();
        fronts.push_back(std::move(front));
    }
    return fronts;
}

} // namespace oracle
