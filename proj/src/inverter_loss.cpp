#include "powergp/inverter_loss.hpp"

#include <cmath>
#include <numbers>

#include "powergp/util.hpp"

namespace powergp {

namespace {
constexpr double kPi = std::numbers::pi;
}

void validate(const OperatingPoint& op) {
    if (!(std::isfinite(op.f_s) && op.f_s > 0)) {
        throw InvariantViolation("operating point 'f_s' must be > 0");
    }
    if (!(std::isfinite(op.v_in) && op.v_in > 0)) {
        throw InvariantViolation("operating point 'v_in' must be > 0");
    }
    if (!(std::isfinite(op.d) && op.d > 0 && op.d <= 1.0)) {
        throw InvariantViolation("operating point 'd' must lie in (0, 1]");
    }
    if (!(std::isfinite(op.r_t) && op.r_t > 0)) {
        throw InvariantViolation("operating point 'r_t' must be > 0");
    }
}

double fundamental_voltage(double v_in, double d) {
    return 4.0 / kPi * v_in * std::sin(kPi / 2.0 * d);
}

std::pair<double, double> transition_angles(double d) {
    const double angle = kPi * (1.0 - d) / 2.0;
    return {angle, angle};
}

TransitionState make_transition_state(const OperatingPoint& op) {
    TransitionState st;
    st.v1 = fundamental_voltage(op.v_in, op.d);
    st.i1 = st.v1 / op.r_t; // perfect resonant matching: Z_T = R_T
    auto [alpha, beta] = transition_angles(op.d);
    st.alpha = alpha;
    st.beta = beta;
    st.i1_alpha = st.i1 * std::sin(alpha);
    st.i1_beta = st.i1 * std::sin(beta);
    st.i1_rms = st.i1 / std::sqrt(2.0); // RMS of the fundamental
    return st;
}

double conduction_loss(double rds_t, double i1_rms) {
    return 2.0 * rds_t * i1_rms * i1_rms;
}

double body_diode_loss(double f_s, double t_dt, double v_sd, double i1,
                       double alpha, double beta) {
    return 2.0 * f_s * t_dt * v_sd * i1 * (std::sin(alpha) + std::sin(beta));
}

double gate_loss(double f_s, double v_dr, double q_g) {
    return 4.0 * f_s * v_dr * q_g;
}

double overlap_loss(double f_s, double v_in, double i1_alpha, double t_on,
                    double i1_beta, double t_off, double c_oss) {
    return f_s * v_in * (i1_alpha * t_on + i1_beta * t_off + c_oss * v_in);
}

SwitchingTimes switching_times(const DeviceParams& p, const GateDriveCondition& gd,
                               double t_c, double i1_alpha, double i1_beta) {
    const double vgsth = vgsth_at(p, t_c);
    const double gfs = gfs_at(p, t_c);
    const double den_on = gd.v_dr - vgsth - i1_alpha / gfs;
    if (den_on <= 0.0) {
        throw InsufficientGateDrive(
            "turn-on plateau denominator <= 0 (v_dr=" + g17(gd.v_dr) +
            " V, vgsth(T)=" + g17(vgsth) + " V, i1_alpha/gfs=" +
            g17(i1_alpha / gfs) + " V)");
    }
    const double den_off = vgsth + i1_beta / gfs;
    if (den_off <= 0.0) {
        throw InsufficientGateDrive("turn-off denominator <= 0 at T=" + g17(t_c));
    }
    return {p.q_gsw * gd.r_g_on / den_on, p.q_gsw * gd.r_g_off / den_off};
}

namespace {

LossBreakdown losses_at_temperature(const OperatingPoint& op, const GateDriveCondition& gd,
                                    const DeviceParams& p, const TransitionState& st,
                                    double t_c) {
    const auto times = switching_times(p, gd, t_c, st.i1_alpha, st.i1_beta);
    LossBreakdown b;
    b.p_cond = conduction_loss(rds_at(p, t_c), st.i1_rms);
    b.p_bd = body_diode_loss(op.f_s, p.t_dt, p.v_sd, st.i1, st.alpha, st.beta);
    b.p_gt = gate_loss(op.f_s, gd.v_dr, p.q_g);
    b.p_ov = overlap_loss(op.f_s, op.v_in, st.i1_alpha, times.t_on,
                          st.i1_beta, times.t_off, p.c_oss);
    b.p_sw = b.p_bd + b.p_gt + b.p_ov;
    b.p_tot = b.p_cond + b.p_sw;
    return b;
}

} // namespace

LossBreakdown total_loss(const OperatingPoint& op, const GateDriveCondition& gd,
                         const DeviceParams& p, const ThermalOptions& opt) {
    validate(op);
    validate(gd);
    const TransitionState st = make_transition_state(op);

    double temp = p.t_a;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        LossBreakdown b = losses_at_temperature(op, gd, p, st, temp);
        const double t_new = p.t_a + p.r_th * b.p_tot;
        if (!std::isfinite(t_new)) {
            throw ThermalNonConvergence("thermal fixed point diverged (T non-finite after " +
                                        std::to_string(it) + " iterations)");
        }
        if (std::abs(t_new - temp) / std::abs(temp) < opt.tolerance) {
            b = losses_at_temperature(op, gd, p, st, t_new);
            b.t_final = t_new;
            b.iterations = it;
            return b;
        }
        temp = t_new;
    }
    throw ThermalNonConvergence(
        "thermal fixed point not reached in " + std::to_string(opt.max_iterations) +
        " iterations (last T=" + g17(temp) + " degC)");
}

} // namespace powergp
