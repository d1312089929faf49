#pragma once

#include <string>

#include "powergp/errors.hpp"

namespace powergp {

// Datasheet and thermal characterization of the four-switch module. Immutable
// after load; all accessors are pure.
struct DeviceParams {
    double rds_25 = 0.0;   // on-resistance at 25 degC, ohm
    double vgsth_25 = 0.0; // gate threshold at 25 degC, V
    double gfs_25 = 0.0;   // transconductance at 25 degC, S
    double q_g = 0.0;      // total gate charge, C
    double q_gsw = 0.0;    // switching gate charge, C
    double c_oss = 0.0;    // output capacitance, F
    double v_sd = 0.0;     // body-diode forward voltage, V
    double t_dt = 0.0;     // gate signal dead-time, s
    double rho_t = 0.0;    // linear thermal coefficient of rds, 1/degC
    double nu_t = 0.0;     // linear thermal coefficient of vgsth, 1/degC
    double gamma_t = 0.0;  // linear thermal coefficient of gfs, 1/degC
    double r_th = 0.0;     // module thermal resistance, degC/W
    double t_a = 25.0;     // ambient temperature, degC
};

struct GateDriveCondition {
    double v_dr = 0.0;    // gate-driver voltage, V
    double r_g_on = 0.0;  // turn-on gate resistance, ohm
    double r_g_off = 0.0; // turn-off gate resistance, ohm
};

void validate(const DeviceParams& p);
void validate(const GateDriveCondition& gd);

// Linear temperature scaling of the three temperature-dependent parameters.
// Throws DegenerateParameter when the scaled value is driven non-positive.
double rds_at(const DeviceParams& p, double t_c);
double vgsth_at(const DeviceParams& p, double t_c);
double gfs_at(const DeviceParams& p, double t_c);

// Flat JSON document with unit-suffixed keys (see configs/device_reference.json).
// Unknown keys are rejected. A reserved "notes" object may annotate fields.
DeviceParams parse_device_params(const std::string& json_text);
DeviceParams load_device_params(const std::string& path);

// Hash of the canonical field dump; recorded as training-set provenance.
std::string device_params_hash(const DeviceParams& p);

} // namespace powergp
