#pragma once

#include <utility>

#include "powergp/device_model.hpp"

namespace powergp {

struct OperatingPoint {
    double f_s = 0.0;  // switching frequency, Hz
    double v_in = 0.0; // input voltage, V
    double d = 0.0;    // duty-cycle, (0, 1]
    double r_t = 0.0;  // load resistance, ohm
};

void validate(const OperatingPoint& op);

// First-harmonic quantities at the voltage transitions. Resonant matching is
// assumed (phi = 0), so alpha = beta and i1 is in phase with v1.
struct TransitionState {
    double v1 = 0.0;       // fundamental voltage amplitude, V
    double i1 = 0.0;       // fundamental current amplitude, A
    double alpha = 0.0;    // rad
    double beta = 0.0;     // rad
    double i1_alpha = 0.0; // switch current at the falling edge, A
    double i1_beta = 0.0;  // switch current at the rising edge, A
    double i1_rms = 0.0;   // i1 / sqrt(2)
};

struct LossBreakdown {
    double p_cond = 0.0; // conduction loss, W
    double p_bd = 0.0;   // body-diode dead-time loss, W
    double p_gt = 0.0;   // gate-drive loss, W
    double p_ov = 0.0;   // overlap + capacitive loss, W
    double p_sw = 0.0;   // p_bd + p_gt + p_ov
    double p_tot = 0.0;  // p_cond + p_sw
    double t_final = 0.0;
    int iterations = 0;
};

struct SwitchingTimes {
    double t_on = 0.0;  // s
    double t_off = 0.0; // s
};

double fundamental_voltage(double v_in, double d);

// alpha = beta = pi (1 - d) / 2, from D = 1 - (alpha + beta)/pi with alpha = beta.
std::pair<double, double> transition_angles(double d);

TransitionState make_transition_state(const OperatingPoint& op);

// The loss formulas carry their per-switch multiplicity inside the printed
// constants (the 2 in the body-diode term, the 4 in the gate term); nothing
// extra is multiplied on top. Whether the overlap term covers one leg or the
// whole bridge is not resolved by the source formulas: it is used exactly as
// written.
double conduction_loss(double rds_t, double i1_rms);
double body_diode_loss(double f_s, double t_dt, double v_sd, double i1,
                       double alpha, double beta);
double gate_loss(double f_s, double v_dr, double q_g);
double overlap_loss(double f_s, double v_in, double i1_alpha, double t_on,
                    double i1_beta, double t_off, double c_oss);

// Throws InsufficientGateDrive when the turn-on plateau denominator is <= 0:
// the point is infeasible for this gate drive, not a numerical failure.
SwitchingTimes switching_times(const DeviceParams& p, const GateDriveCondition& gd,
                               double t_c, double i1_alpha, double i1_beta);

struct ThermalOptions {
    double tolerance = 1e-4; // normalized temperature step threshold
    int max_iterations = 1000;
};

// Fixed point of T -> t_a + r_th * p_tot(T), iterated from T = t_a. The
// returned breakdown is re-evaluated at the converged temperature.
LossBreakdown total_loss(const OperatingPoint& op, const GateDriveCondition& gd,
                         const DeviceParams& p, const ThermalOptions& opt = {});

} // namespace powergp
