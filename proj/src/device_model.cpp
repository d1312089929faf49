#include "powergp/device_model.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "powergp/util.hpp"

namespace powergp {

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) {
        throw InvariantViolation("device parameter '" + field + "' " + what);
    }
}

} // namespace

void validate(const DeviceParams& p) {
    require(std::isfinite(p.rds_25) && p.rds_25 > 0, "rds_25_ohm", "must be > 0");
    require(std::isfinite(p.vgsth_25) && p.vgsth_25 > 0, "vgsth_25_v", "must be > 0");
    require(std::isfinite(p.gfs_25) && p.gfs_25 > 0, "gfs_25_s", "must be > 0");
    require(std::isfinite(p.q_gsw) && p.q_gsw > 0, "q_gsw_coulomb", "must be > 0");
    require(std::isfinite(p.q_g) && p.q_g >= p.q_gsw, "q_g_coulomb", "must be >= q_gsw_coulomb");
    require(std::isfinite(p.c_oss) && p.c_oss >= 0, "c_oss_farad", "must be >= 0");
    require(std::isfinite(p.v_sd) && p.v_sd >= 0, "v_sd_v", "must be >= 0");
    require(std::isfinite(p.t_dt) && p.t_dt >= 0, "t_dt_s", "must be >= 0");
    require(std::isfinite(p.r_th) && p.r_th > 0, "r_th_degc_per_w", "must be > 0");
    require(std::isfinite(p.rho_t), "rho_t_per_degc", "must be finite");
    require(std::isfinite(p.nu_t), "nu_t_per_degc", "must be finite");
    require(std::isfinite(p.gamma_t), "gamma_t_per_degc", "must be finite");
    require(std::isfinite(p.t_a), "t_a_degc", "must be finite");
}

void validate(const GateDriveCondition& gd) {
    if (!(std::isfinite(gd.v_dr) && gd.v_dr > 0)) {
        throw InvariantViolation("gate drive 'v_dr' must be > 0");
    }
    if (!(std::isfinite(gd.r_g_on) && gd.r_g_on > 0)) {
        throw InvariantViolation("gate drive 'r_g_on' must be > 0");
    }
    if (!(std::isfinite(gd.r_g_off) && gd.r_g_off > 0)) {
        throw InvariantViolation("gate drive 'r_g_off' must be > 0");
    }
}

double rds_at(const DeviceParams& p, double t_c) {
    const double value = p.rds_25 * (1.0 + p.rho_t * (t_c - p.t_a));
    if (!(value > 0.0)) {
        throw DegenerateParameter("rds(T) <= 0 at T=" + g17(t_c) + " degC");
    }
    return value;
}

double vgsth_at(const DeviceParams& p, double t_c) {
    const double value = p.vgsth_25 * (1.0 + p.nu_t * (t_c - p.t_a));
    if (!(value > 0.0)) {
        throw DegenerateParameter("vgsth(T) <= 0 at T=" + g17(t_c) + " degC");
    }
    return value;
}

double gfs_at(const DeviceParams& p, double t_c) {
    const double value = p.gfs_25 * (1.0 + p.gamma_t * (t_c - p.t_a));
    if (!(value > 0.0)) {
        throw DegenerateParameter("gfs(T) <= 0 at T=" + g17(t_c) + " degC");
    }
    return value;
}

namespace {

constexpr std::array<const char*, 13> kDeviceKeys = {
    "rds_25_ohm",    "vgsth_25_v",     "gfs_25_s",         "q_g_coulomb",
    "q_gsw_coulomb", "c_oss_farad",    "v_sd_v",           "t_dt_s",
    "rho_t_per_degc", "nu_t_per_degc", "gamma_t_per_degc", "r_th_degc_per_w",
    "t_a_degc"};

double get_number(const nlohmann::json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end()) {
        throw ParseError(std::string("device config is missing field '") + key + "'");
    }
    if (!it->is_number()) {
        throw ParseError(std::string("device config field '") + key + "' is not a number");
    }
    return it->get<double>();
}

} // namespace

DeviceParams parse_device_params(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("device config: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("device config must be a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (key == "notes") continue; // free-form field annotations
        bool known = false;
        for (const char* wanted : kDeviceKeys) {
            if (key == wanted) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ParseError("device config has unknown key '" + key + "'");
        }
    }

    DeviceParams p;
    p.rds_25 = get_number(doc, "rds_25_ohm");
    p.vgsth_25 = get_number(doc, "vgsth_25_v");
    p.gfs_25 = get_number(doc, "gfs_25_s");
    p.q_g = get_number(doc, "q_g_coulomb");
    p.q_gsw = get_number(doc, "q_gsw_coulomb");
    p.c_oss = get_number(doc, "c_oss_farad");
    p.v_sd = get_number(doc, "v_sd_v");
    p.t_dt = get_number(doc, "t_dt_s");
    p.rho_t = get_number(doc, "rho_t_per_degc");
    p.nu_t = get_number(doc, "nu_t_per_degc");
    p.gamma_t = get_number(doc, "gamma_t_per_degc");
    p.r_th = get_number(doc, "r_th_degc_per_w");
    p.t_a = get_number(doc, "t_a_degc");
    validate(p);
    return p;
}

DeviceParams load_device_params(const std::string& path) {
    return parse_device_params(read_text_file(path));
}

std::string device_params_hash(const DeviceParams& p) {
    std::ostringstream dump;
    dump << g17(p.rds_25) << '\n' << g17(p.vgsth_25) << '\n' << g17(p.gfs_25) << '\n'
         << g17(p.q_g) << '\n' << g17(p.q_gsw) << '\n' << g17(p.c_oss) << '\n'
         << g17(p.v_sd) << '\n' << g17(p.t_dt) << '\n' << g17(p.rho_t) << '\n'
         << g17(p.nu_t) << '\n' << g17(p.gamma_t) << '\n' << g17(p.r_th) << '\n'
         << g17(p.t_a) << '\n';
    return fnv1a64_hex(dump.str());
}

} // namespace powergp
