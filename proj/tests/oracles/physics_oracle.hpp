#pragma once

// Independent straight-line evaluation of the analytical loss model used to
// cross-check the inverter_loss module. Deliberately shares no code with the
// library: raw doubles in, raw doubles out, formulas transcribed one per line.

#include <cmath>
#include <stdexcept>

namespace oracle {

struct DeviceIn {
    double rds_25;
    double vgsth_25;
    double gfs_25;
    double q_g;
    double q_gsw;
    double c_oss;
    double v_sd;
    double t_dt;
    double rho_t;
    double nu_t;
    double gamma_t;
    double r_th;
    double t_a;
};

struct PointIn {
    double f_s;
    double v_in;
    double d;
    double r_t;
    double v_dr;
    double r_g_on;
    double r_g_off;
};

struct LossOut {
    double p_cond;
    double p_bd;
    double p_gt;
    double p_ov;
    double p_sw;
    double p_tot;
    double t_final;
    int iterations;
};

inline LossOut straight_line_losses(const DeviceIn& dv, const PointIn& pt,
                                    double tol = 1e-4, int max_iter = 1000) {
    const double pi = 3.14159265358979323846;

    const double v1 = 4.0 / pi * pt.v_in * std::sin(pi / 2.0 * pt.d);
    const double i1 = v1 / pt.r_t;
    const double alpha = pi * (1.0 - pt.d) / 2.0;
    const double beta = alpha;
    const double s_alpha = std::sin(alpha);
    const double s_beta = std::sin(beta);
    const double i1_alpha = i1 * s_alpha;
    const double i1_beta = i1 * s_beta;
    const double i1_rms = i1 / std::sqrt(2.0);

    auto losses_at = [&](double temp, LossOut& out) {
        const double rds = dv.rds_25 * (1.0 + dv.rho_t * (temp - dv.t_a));
        const double vgsth = dv.vgsth_25 * (1.0 + dv.nu_t * (temp - dv.t_a));
        const double gfs = dv.gfs_25 * (1.0 + dv.gamma_t * (temp - dv.t_a));
        if (rds <= 0.0 || gfs <= 0.0) {
            throw std::runtime_error("oracle: thermal coefficient drove parameter non-positive");
        }
        const double den_on = pt.v_dr - vgsth - i1_alpha / gfs;
        const double den_off = vgsth + i1_beta / gfs;
        if (den_on <= 0.0 || den_off <= 0.0) {
            throw std::runtime_error("oracle: gate drive cannot sustain plateau");
        }
        const double t_on = dv.q_gsw * pt.r_g_on / den_on;
        const double t_off = dv.q_gsw * pt.r_g_off / den_off;

        out.p_cond = 2.0 * rds * i1_rms * i1_rms;
        out.p_bd = 2.0 * pt.f_s * dv.t_dt * dv.v_sd * i1 * (s_alpha + s_beta);
        out.p_gt = 4.0 * pt.f_s * pt.v_dr * dv.q_g;
        out.p_ov = pt.f_s * pt.v_in * (i1_alpha * t_on + i1_beta * t_off + dv.c_oss * pt.v_in);
        out.p_sw = out.p_bd + out.p_gt + out.p_ov;
        out.p_tot = out.p_cond + out.p_sw;
    };

    LossOut out{};
    double temp = dv.t_a;
    for (int it = 1; it <= max_iter; ++it) {
        losses_at(temp, out);
        const double t_new = dv.t_a + dv.r_th * out.p_tot;
        if (std::abs(t_new - temp) / std::abs(temp) < tol) {
            out.t_final = t_new;
            out.iterations = it;
            losses_at(t_new, out);
            return out;
        }
        temp = t_new;
    }
    throw std::runtime_error("oracle: thermal loop did not converge");
}

} // namespace oracle
