#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "powergp/inverter_loss.hpp"

namespace powergp {

// Operating-condition grid. The four leading lists span the model input
// variables (point index i), the last two span the gate-drive conditions
// (condition index j).
struct GridSpec {
    std::vector<double> f_s_values;  // Hz
    std::vector<double> v_in_values; // V
    std::vector<double> d_values;    // duty
    std::vector<double> r_t_values;  // ohm
    std::vector<double> v_dr_values; // V
    std::vector<double> r_g_values;  // ohm

    [[nodiscard]] std::size_t n() const {
        return f_s_values.size() * v_in_values.size() * d_values.size() * r_t_values.size();
    }
    [[nodiscard]] std::size_t m() const {
        return v_dr_values.size() * r_g_values.size();
    }
};

void validate(const GridSpec& g);
GridSpec parse_grid_spec(const std::string& json_text);
GridSpec load_grid_spec(const std::string& path);

struct DataVector {
    OperatingPoint op;
    GateDriveCondition gd;
    double y = 0.0;                  // switching loss p_sw, W
    std::size_t point_index = 0;     // i
    std::size_t condition_index = 0; // j
};

// Rectangular n x m training set, y indexed [condition][point].
struct TrainingSet {
    std::vector<OperatingPoint> points;          // size n
    std::vector<GateDriveCondition> conditions;  // size m
    std::vector<std::vector<double>> y;          // [m][n]
    GridSpec grid;                               // provenance
    std::string device_config_hash;              // provenance

    [[nodiscard]] std::size_t n() const { return points.size(); }
    [[nodiscard]] std::size_t m() const { return conditions.size(); }
    [[nodiscard]] std::vector<DataVector> vectors() const; // grouped by j, then i
};

// Full Cartesian product in deterministic lexicographic order, f_s outermost
// and r_g innermost.
std::vector<std::pair<OperatingPoint, GateDriveCondition>> expand_grid(const GridSpec& g);

// Simulates y_ij = p_sw at every cell. Any infeasible point aborts generation:
// the chi-squared normalization downstream assumes a rectangular set.
TrainingSet generate_training_set(const GridSpec& g, const DeviceParams& p);

void save_training_set(const TrainingSet& ts, const std::string& path);
TrainingSet load_training_set(const std::string& path);

} // namespace powergp
