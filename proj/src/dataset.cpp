#include "powergp/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "powergp/util.hpp"

namespace powergp {

namespace {

void require_list(const std::vector<double>& values, const char* key) {
    if (values.empty()) {
        throw InvariantViolation(std::string("grid list '") + key + "' must be non-empty");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw InvariantViolation(std::string("grid list '") + key + "' has a non-finite value");
        }
    }
}

} // namespace

void validate(const GridSpec& g) {
    require_list(g.f_s_values, "f_s_hz");
    require_list(g.v_in_values, "v_in_v");
    require_list(g.d_values, "d");
    require_list(g.r_t_values, "r_t_ohm");
    require_list(g.v_dr_values, "v_dr_v");
    require_list(g.r_g_values, "r_g_ohm");
    for (double f : g.f_s_values) {
        if (f <= 0) throw InvariantViolation("grid 'f_s_hz' values must be > 0");
    }
    for (double v : g.v_in_values) {
        if (v <= 0) throw InvariantViolation("grid 'v_in_v' values must be > 0");
    }
    for (double d : g.d_values) {
        if (d <= 0 || d > 1) throw InvariantViolation("grid 'd' values must lie in (0, 1]");
    }
    for (double r : g.r_t_values) {
        if (r <= 0) throw InvariantViolation("grid 'r_t_ohm' values must be > 0");
    }
    for (double v : g.v_dr_values) {
        if (v <= 0) throw InvariantViolation("grid 'v_dr_v' values must be > 0");
    }
    for (double r : g.r_g_values) {
        if (r <= 0) throw InvariantViolation("grid 'r_g_ohm' values must be > 0");
    }
}

GridSpec parse_grid_spec(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("grid spec: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("grid spec must be a JSON object");
    }
    const std::array<const char*, 6> keys = {"f_s_hz", "v_in_v", "d",
                                             "r_t_ohm", "v_dr_v", "r_g_ohm"};
    for (const auto& [key, value] : doc.items()) {
        if (key == "notes") continue;
        if (std::find_if(keys.begin(), keys.end(),
                         [&](const char* k) { return key == k; }) == keys.end()) {
            throw ParseError("grid spec has unknown key '" + key + "'");
        }
    }
    auto get_list = [&](const char* key) {
        auto it = doc.find(key);
        if (it == doc.end()) {
            throw ParseError(std::string("grid spec is missing list '") + key + "'");
        }
        if (!it->is_array()) {
            throw ParseError(std::string("grid spec '") + key + "' must be an array of numbers");
        }
        std::vector<double> out;
        for (const auto& v : *it) {
            if (!v.is_number()) {
                throw ParseError(std::string("grid spec '") + key + "' must contain only numbers");
            }
            out.push_back(v.get<double>());
        }
        return out;
    };
    GridSpec g;
    g.f_s_values = get_list("f_s_hz");
    g.v_in_values = get_list("v_in_v");
    g.d_values = get_list("d");
    g.r_t_values = get_list("r_t_ohm");
    g.v_dr_values = get_list("v_dr_v");
    g.r_g_values = get_list("r_g_ohm");
    validate(g);
    return g;
}

GridSpec load_grid_spec(const std::string& path) {
    return parse_grid_spec(read_text_file(path));
}

std::vector<std::pair<OperatingPoint, GateDriveCondition>> expand_grid(const GridSpec& g) {
    validate(g);
    std::vector<std::pair<OperatingPoint, GateDriveCondition>> out;
    out.reserve(g.n() * g.m());
    for (double f_s : g.f_s_values)
        for (double v_in : g.v_in_values)
            for (double d : g.d_values)
                for (double r_t : g.r_t_values)
                    for (double v_dr : g.v_dr_values)
                        for (double r_g : g.r_g_values)
                            out.push_back({OperatingPoint{f_s, v_in, d, r_t},
                                           GateDriveCondition{v_dr, r_g, r_g}});
    return out;
}

namespace {

std::vector<OperatingPoint> grid_points(const GridSpec& g) {
    std::vector<OperatingPoint> points;
    points.reserve(g.n());
    for (double f_s : g.f_s_values)
        for (double v_in : g.v_in_values)
            for (double d : g.d_values)
                for (double r_t : g.r_t_values)
                    points.push_back({f_s, v_in, d, r_t});
    return points;
}

std::vector<GateDriveCondition> grid_conditions(const GridSpec& g) {
    std::vector<GateDriveCondition> conditions;
    conditions.reserve(g.m());
    for (double v_dr : g.v_dr_values)
        for (double r_g : g.r_g_values)
            conditions.push_back({v_dr, r_g, r_g});
    return conditions;
}

} // namespace

std::vector<DataVector> TrainingSet::vectors() const {
    std::vector<DataVector> out;
    out.reserve(n() * m());
    for (std::size_t j = 0; j < m(); ++j) {
        for (std::size_t i = 0; i < n(); ++i) {
            out.push_back({points[i], conditions[j], y[j][i], i, j});
        }
    }
    return out;
}

TrainingSet generate_training_set(const GridSpec& g, const DeviceParams& p) {
    validate(g);
    validate(p);

    TrainingSet ts;
    ts.grid = g;
    ts.device_config_hash = device_params_hash(p);
    ts.points = grid_points(g);
    ts.conditions = grid_conditions(g);
    ts.y.assign(ts.m(), std::vector<double>(ts.n(), 0.0));

    std::vector<std::string> failures;
    for (std::size_t j = 0; j < ts.m(); ++j) {
        for (std::size_t i = 0; i < ts.n(); ++i) {
            try {
                ts.y[j][i] = total_loss(ts.points[i], ts.conditions[j], p).p_sw;
            } catch (const Error& e) {
                failures.push_back("(i=" + std::to_string(i) + ", j=" + std::to_string(j) +
                                   "): " + e.what());
            }
        }
    }
    if (!failures.empty()) {
        std::string msg = failures.front();
        if (failures.size() > 1) {
            msg += " [" + std::to_string(failures.size()) + " infeasible points total]";
        }
        throw InfeasiblePoint(0, 0, msg);
    }
    return ts;
}

namespace {

constexpr const char* kHeaderMagic = "# powergp-training-set v1";
constexpr const char* kColumnHeader = "i,j,f_s_hz,v_in_v,d,r_t_ohm,v_dr_v,r_g_ohm,p_sw_w";
// Reserved for measured data with uncertainty; no weighting logic consumes it.
constexpr const char* kColumnHeaderSigma =
    "i,j,f_s_hz,v_in_v,d,r_t_ohm,v_dr_v,r_g_ohm,p_sw_w,sigma_y_w";

void write_grid_line(std::ostringstream& out, const char* key,
                     const std::vector<double>& values) {
    out << "# " << key;
    for (double v : values) out << ' ' << g17(v);
    out << '\n';
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::vector<double> parse_grid_line(const std::string& line, const char* key,
                                    std::size_t line_no) {
    const std::string prefix = std::string("# ") + key + " ";
    if (line.rfind(prefix, 0) != 0) {
        throw FormatError("training set line " + std::to_string(line_no) +
                          ": expected '" + prefix + "...' header");
    }
    std::vector<double> values;
    std::istringstream rest(line.substr(prefix.size()));
    std::string token;
    while (rest >> token) {
        values.push_back(parse_double_strict(token, "training set header '" + std::string(key) + "'"));
    }
    return values;
}

std::size_t parse_index(const std::string& token, const char* what, std::size_t line_no) {
    if (token.empty() || token.size() > 9 ||
        token.find_first_not_of("0123456789") != std::string::npos) {
        throw FormatError("training set line " + std::to_string(line_no) + ": bad " +
                          what + " '" + token + "'");
    }
    return static_cast<std::size_t>(std::stoull(token));
}

} // namespace

void save_training_set(const TrainingSet& ts, const std::string& path) {
    std::ostringstream out;
    out << kHeaderMagic << '\n';
    out << "# device_config_hash " << ts.device_config_hash << '\n';
    write_grid_line(out, "f_s_hz", ts.grid.f_s_values);
    write_grid_line(out, "v_in_v", ts.grid.v_in_values);
    write_grid_line(out, "d", ts.grid.d_values);
    write_grid_line(out, "r_t_ohm", ts.grid.r_t_values);
    write_grid_line(out, "v_dr_v", ts.grid.v_dr_values);
    write_grid_line(out, "r_g_ohm", ts.grid.r_g_values);
    out << kColumnHeader << '\n';
    for (const DataVector& v : ts.vectors()) {
        out << v.point_index << ',' << v.condition_index << ',' << g17(v.op.f_s) << ','
            << g17(v.op.v_in) << ',' << g17(v.op.d) << ',' << g17(v.op.r_t) << ','
            << g17(v.gd.v_dr) << ',' << g17(v.gd.r_g_on) << ',' << g17(v.y) << '\n';
    }
    write_text_file(path, out.str());
}

TrainingSet load_training_set(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line)) {
            throw FormatError("training set '" + path + "': truncated at line " +
                              std::to_string(line_no + 1));
        }
        ++line_no;
    };

    next_line();
    if (line != kHeaderMagic) {
        throw FormatError("training set '" + path + "': missing magic header");
    }
    next_line();
    const std::string hash_prefix = "# device_config_hash ";
    if (line.rfind(hash_prefix, 0) != 0) {
        throw FormatError("training set '" + path + "': missing device_config_hash header");
    }
    TrainingSet ts;
    ts.device_config_hash = line.substr(hash_prefix.size());

    next_line();
    ts.grid.f_s_values = parse_grid_line(line, "f_s_hz", line_no);
    next_line();
    ts.grid.v_in_values = parse_grid_line(line, "v_in_v", line_no);
    next_line();
    ts.grid.d_values = parse_grid_line(line, "d", line_no);
    next_line();
    ts.grid.r_t_values = parse_grid_line(line, "r_t_ohm", line_no);
    next_line();
    ts.grid.v_dr_values = parse_grid_line(line, "v_dr_v", line_no);
    next_line();
    ts.grid.r_g_values = parse_grid_line(line, "r_g_ohm", line_no);
    validate(ts.grid);

    next_line();
    bool has_sigma = false;
    if (line == kColumnHeaderSigma) {
        has_sigma = true;
    } else if (line != kColumnHeader) {
        throw FormatError("training set '" + path + "': unexpected column header");
    }

    ts.points = grid_points(ts.grid);
    ts.conditions = grid_conditions(ts.grid);
    const std::size_t n = ts.n();
    const std::size_t m = ts.m();
    ts.y.assign(m, std::vector<double>(n, 0.0));
    std::vector<std::vector<bool>> seen(m, std::vector<bool>(n, false));

    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        const std::size_t expected = has_sigma ? 10u : 9u;
        if (fields.size() != expected) {
            throw FormatError("training set line " + std::to_string(line_no) +
                              ": expected " + std::to_string(expected) + " fields, got " +
                              std::to_string(fields.size()));
        }
        const std::size_t i = parse_index(fields[0], "point index", line_no);
        const std::size_t j = parse_index(fields[1], "condition index", line_no);
        if (i >= n || j >= m) {
            throw FormatError("training set line " + std::to_string(line_no) +
                              ": index (i=" + fields[0] + ", j=" + fields[1] +
                              ") outside the declared grid");
        }
        if (seen[j][i]) {
            throw FormatError("training set line " + std::to_string(line_no) +
                              ": duplicated cell (i=" + fields[0] + ", j=" + fields[1] + ")");
        }
        const char* names[] = {"f_s_hz", "v_in_v", "d", "r_t_ohm", "v_dr_v", "r_g_ohm"};
        const double expected_vals[] = {ts.points[i].f_s,    ts.points[i].v_in,
                                        ts.points[i].d,      ts.points[i].r_t,
                                        ts.conditions[j].v_dr, ts.conditions[j].r_g_on};
        for (int c = 0; c < 6; ++c) {
            const double parsed = parse_double_strict(fields[2 + c], names[c]);
            if (parsed != expected_vals[c]) {
                throw FormatError("training set line " + std::to_string(line_no) + ": column " +
                                  names[c] + " disagrees with the grid header");
            }
        }
        const double y = parse_double_strict(fields[8], "p_sw_w");
        if (!(std::isfinite(y) && y >= 0)) {
            throw FormatError("training set line " + std::to_string(line_no) +
                              ": p_sw_w must be finite and >= 0");
        }
        if (has_sigma) {
            parse_double_strict(fields[9], "sigma_y_w"); // reserved, not consumed
        }
        ts.y[j][i] = y;
        seen[j][i] = true;
        ++rows;
    }
    if (rows != n * m) {
        throw FormatError("training set '" + path + "': expected " + std::to_string(n * m) +
                          " rows, found " + std::to_string(rows));
    }
    return ts;
}

} // namespace powergp
