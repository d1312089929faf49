#include "powergp/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>
#include <json.hpp>

#include "powergp/util.hpp"

namespace powergp {

ConditionData condition_slice(const TrainingSet& ts, std::size_t condition_index,
                              std::vector<double>& fs_storage,
                              std::vector<double>& vin_storage,
                              std::vector<double>& d_storage,
                              std::vector<double>& rt_storage) {
    if (condition_index >= ts.m()) {
        throw InvariantViolation("condition index out of range");
    }
    const std::size_t n = ts.n();
    fs_storage.resize(n);
    vin_storage.resize(n);
    d_storage.resize(n);
    rt_storage.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        fs_storage[i] = ts.points[i].f_s;
        vin_storage[i] = ts.points[i].v_in;
        d_storage[i] = ts.points[i].d;
        rt_storage[i] = ts.points[i].r_t;
    }
    ConditionData data;
    data.x = EvalColumns{fs_storage, vin_storage, d_storage, rt_storage};
    data.y = ts.y[condition_index];
    return data;
}

namespace {

// Central-difference Jacobian column step.
double diff_step(double p) { return std::max(1e-6, 1e-6 * std::abs(p)); }

struct MaskedProblem {
    const Expr* expr;
    const ConditionData* data;
    BatchEvaluator* evaluator;
    std::vector<std::size_t> included; // indices with finite model values at p_init

    // chi^2 = (1/n_inc) sum r^2 over the included points; nullopt when the
    // model leaves the evaluable domain at p.
    std::optional<double> eval_chi(std::span<const double> p, std::vector<double>& f) const {
        evaluator->evaluate(*expr, data->x, p, f);
        double sum = 0.0;
        for (std::size_t idx : included) {
            const double r = f[idx] - data->y[idx];
            if (!std::isfinite(r)) return std::nullopt;
            sum += r * r;
        }
        return sum / static_cast<double>(included.size());
    }
};

// Jacobian of model values at the included points, one column per
// coefficient. Falls back to one-sided differences when a probe point leaves
// the domain; a column where both probes fail is left at zero.
Eigen::MatrixXd jacobian_at(const MaskedProblem& prob, std::span<const double> p,
                            const std::vector<double>& f_center) {
    const auto n_inc = static_cast<Eigen::Index>(prob.included.size());
    const auto n_par = static_cast<Eigen::Index>(p.size());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_inc, n_par);
    std::vector<double> probe(p.begin(), p.end());
    std::vector<double> f_plus(f_center.size());
    std::vector<double> f_minus(f_center.size());
    for (Eigen::Index k = 0; k < n_par; ++k) {
        const double h = diff_step(probe[static_cast<std::size_t>(k)]);
        const double saved = probe[static_cast<std::size_t>(k)];

        probe[static_cast<std::size_t>(k)] = saved + h;
        const bool plus_ok = prob.eval_chi(probe, f_plus).has_value();
        probe[static_cast<std::size_t>(k)] = saved - h;
        const bool minus_ok = prob.eval_chi(probe, f_minus).has_value();
        probe[static_cast<std::size_t>(k)] = saved;

        if (plus_ok && minus_ok) {
            for (Eigen::Index r = 0; r < n_inc; ++r) {
                const std::size_t idx = prob.included[static_cast<std::size_t>(r)];
                jac(r, k) = (f_plus[idx] - f_minus[idx]) / (2.0 * h);
            }
        } else if (plus_ok) {
            for (Eigen::Index r = 0; r < n_inc; ++r) {
                const std::size_t idx = prob.included[static_cast<std::size_t>(r)];
                jac(r, k) = (f_plus[idx] - f_center[idx]) / h;
            }
        } else if (minus_ok) {
            for (Eigen::Index r = 0; r < n_inc; ++r) {
                const std::size_t idx = prob.included[static_cast<std::size_t>(r)];
                jac(r, k) = (f_center[idx] - f_minus[idx]) / h;
            }
        }
    }
    return jac;
}

} // namespace

ConditionFit nlls_fit(const Expr& e, const ConditionData& data,
                      std::span<const double> p_init, const FitOptions& opt) {
    const std::size_t n = data.y.size();
    const int n_coeff = e.coefficient_count();
    if (data.x.size() != n) {
        throw InvariantViolation("nlls_fit: column/target size mismatch");
    }
    if (static_cast<int>(p_init.size()) != n_coeff) {
        throw MissingCoefficient("nlls_fit: expected " + std::to_string(n_coeff) +
                                 " initial coefficients, got " + std::to_string(p_init.size()));
    }
    if (n <= static_cast<std::size_t>(n_coeff)) {
        throw InvariantViolation("nlls_fit: need more data points than coefficients");
    }

    BatchEvaluator evaluator(n);
    MaskedProblem prob{&e, &data, &evaluator, {}};

    // Build the evaluable-point mask at the initial guess. More than 1% of
    // failing points means the model is unusable on this condition.
    std::vector<double> f(n);
    const std::size_t bad = evaluator.evaluate(e, data.x, p_init, f);
    if (bad > 0 && static_cast<double>(bad) >= 0.01 * static_cast<double>(n)) {
        throw EvalDomainError("nlls_fit: " + std::to_string(bad) + " of " +
                              std::to_string(n) + " points are outside the model domain");
    }
    prob.included.reserve(n - bad);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isfinite(f[i])) prob.included.push_back(i);
    }
    if (prob.included.size() <= static_cast<std::size_t>(n_coeff)) {
        throw InvariantViolation("nlls_fit: too few evaluable points");
    }

    ConditionFit fit;
    fit.coeffs.assign(p_init.begin(), p_init.end());

    auto chi0 = prob.eval_chi(fit.coeffs, f);
    double chi = chi0.value(); // mask built from this point, cannot fail
    if (n_coeff == 0) {
        fit.chi_sq = chi;
        fit.converged = true;
        return fit;
    }

    const auto n_inc = static_cast<double>(prob.included.size());
    double lambda = opt.lambda_init;
    std::vector<double> trial(fit.coeffs.size());
    std::vector<double> f_trial(n);

    for (int it = 1; it <= opt.max_iterations; ++it) {
        fit.iterations = it;
        Eigen::MatrixXd jac = jacobian_at(prob, fit.coeffs, f);
        if (it == 1) {
            fit.singular_jacobian =
                Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(jac).rank() < n_coeff;
        }

        Eigen::VectorXd residual(static_cast<Eigen::Index>(prob.included.size()));
        for (std::size_t r = 0; r < prob.included.size(); ++r) {
            residual(static_cast<Eigen::Index>(r)) = f[prob.included[r]] - data.y[prob.included[r]];
        }
        const Eigen::VectorXd jtr = jac.transpose() * residual;
        const Eigen::VectorXd grad = (2.0 / n_inc) * jtr;
        if (grad.lpNorm<Eigen::Infinity>() < opt.grad_tol || chi == 0.0) {
            fit.converged = true;
            break;
        }

        Eigen::MatrixXd jtj = jac.transpose() * jac;
        const double max_diag = jtj.diagonal().maxCoeff();
        Eigen::VectorXd damping = jtj.diagonal().cwiseMax(std::max(1e-12 * max_diag, 1e-300));

        bool accepted = false;
        while (lambda <= opt.lambda_max) {
            Eigen::MatrixXd system = jtj;
            system.diagonal() += lambda * damping;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
            Eigen::VectorXd step;
            if (ldlt.info() == Eigen::Success) {
                step = ldlt.solve(-jtr);
            }
            if (step.size() == 0 || !step.allFinite()) {
                lambda *= opt.lambda_grow;
                continue;
            }
            for (std::size_t k = 0; k < trial.size(); ++k) {
                trial[k] = fit.coeffs[k] + step(static_cast<Eigen::Index>(k));
            }
            // Non-strict acceptance: a zero-decrease step still satisfies the
            // relative-decrease convergence test and never raises chi^2.
            auto chi_trial = prob.eval_chi(trial, f_trial);
            if (chi_trial && *chi_trial <= chi) {
                const double rel_decrease = (chi - *chi_trial) / chi;
                fit.coeffs = trial;
                f = f_trial;
                chi = *chi_trial;
                lambda = std::max(lambda * opt.lambda_shrink, 1e-15);
                accepted = true;
                if (rel_decrease < opt.chi_rel_tol || chi == 0.0) {
                    fit.converged = true;
                }
                break;
            }
            lambda *= opt.lambda_grow;
        }
        if (!accepted || fit.converged) {
            break; // damping exhausted or tolerance met
        }
    }

    if (fit.singular_jacobian) {
        fit.converged = false;
    }
    fit.chi_sq = chi;
    return fit;
}

double rmse(std::span<const double> chi_sqs) {
    if (chi_sqs.empty()) {
        throw InvariantViolation("rmse: need at least one chi^2 value");
    }
    double sum = 0.0;
    for (double c : chi_sqs) sum += c;
    return std::sqrt(sum / static_cast<double>(chi_sqs.size()));
}

ErrorStats percent_errors(const Expr& e, std::span<const ConditionFit> fits,
                          const TrainingSet& ts) {
    if (fits.size() != ts.m()) {
        throw InvariantViolation("percent_errors: one fit per condition is required");
    }
    const std::size_t n = ts.n();
    std::vector<double> fs_col, vin_col, d_col, rt_col;
    ErrorStats stats;
    stats.errors.reserve(n * ts.m());
    BatchEvaluator evaluator(n);
    std::vector<double> f(n);
    for (std::size_t j = 0; j < ts.m(); ++j) {
        const ConditionFit& fit = fits[j];
        ConditionData data = condition_slice(ts, j, fs_col, vin_col, d_col, rt_col);
        const std::size_t bad = evaluator.evaluate(e, data.x, fit.coeffs, f);
        if (bad > 0) {
            throw EvalDomainError("percent_errors: model not evaluable at " +
                                  std::to_string(bad) + " points of condition " +
                                  std::to_string(j));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (data.y[i] == 0.0) {
                throw ZeroReference("percent_errors: y=0 at (i=" + std::to_string(i) +
                                    ", j=" + std::to_string(j) + ")");
            }
            stats.errors.push_back((f[i] - data.y[i]) * 100.0 / data.y[i]);
        }
    }

    double sum = 0.0;
    for (double err : stats.errors) sum += err;
    stats.mu_err = sum / static_cast<double>(stats.errors.size());
    double sq = 0.0;
    for (double err : stats.errors) {
        const double dev = err - stats.mu_err;
        sq += dev * dev;
        stats.err_max = std::max(stats.err_max, std::abs(err));
    }
    stats.sigma_err = std::sqrt(sq / static_cast<double>(stats.errors.size()));
    return stats;
}

std::vector<double> lls_polyfit(std::span<const double> x, std::span<const double> y,
                                int degree, bool force_leading_zero) {
    if (degree != 1 && degree != 2) {
        throw InvariantViolation("lls_polyfit: degree must be 1 or 2");
    }
    if (x.size() != y.size()) {
        throw InvariantViolation("lls_polyfit: x/y size mismatch");
    }
    const int n_par = degree + 1 - (force_leading_zero ? 1 : 0);
    if (static_cast<int>(x.size()) < n_par) {
        throw InvariantViolation("lls_polyfit: not enough points for the requested degree");
    }

    Eigen::MatrixXd design(static_cast<Eigen::Index>(x.size()), n_par);
    for (std::size_t r = 0; r < x.size(); ++r) {
        int col = 0;
        for (int power = force_leading_zero ? degree - 1 : degree; power >= 0; --power) {
            design(static_cast<Eigen::Index>(r), col++) = std::pow(x[r], power);
        }
    }
    Eigen::VectorXd target(static_cast<Eigen::Index>(y.size()));
    for (std::size_t r = 0; r < y.size(); ++r) {
        target(static_cast<Eigen::Index>(r)) = y[r];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < n_par) {
        throw RankDeficient("lls_polyfit: design matrix rank " + std::to_string(qr.rank()) +
                            " < " + std::to_string(n_par));
    }
    const Eigen::VectorXd solution = qr.solve(target);

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(degree) + 1);
    if (force_leading_zero) out.push_back(0.0);
    for (Eigen::Index k = 0; k < solution.size(); ++k) {
        out.push_back(solution(k));
    }
    return out;
}

const CoefficientSurface::Entry* CoefficientSurface::find(int coeff_index) const {
    for (const Entry& e : entries) {
        if (e.coeff_index == coeff_index) return &e;
    }
    return nullptr;
}

double CoefficientSurface::evaluate(int coeff_index, double v_dr, double r_g) const {
    const Entry* entry = find(coeff_index);
    if (entry == nullptr) {
        throw InvariantViolation("coefficient p" + std::to_string(coeff_index) +
                                 " has no fitted surface");
    }
    double a[3];
    for (int x = 0; x < 3; ++x) {
        a[x] = entry->b[x][0] * r_g * r_g + entry->b[x][1] * r_g + entry->b[x][2];
    }
    return a[0] * v_dr * v_dr + a[1] * v_dr + a[2];
}

CoefficientSurface fit_coefficient_surface(const GridSpec& grid,
                                           std::span<const ConditionFit> fits,
                                           const std::set<int>& which_coeffs,
                                           const std::set<int>& force_b0_zero) {
    const std::size_t m1 = grid.v_dr_values.size();
    const std::size_t m2 = grid.r_g_values.size();
    if (fits.size() != m1 * m2) {
        throw InvariantViolation("fit_coefficient_surface: need a fit for every "
                                 "(v_dr, r_g) grid cell");
    }

    CoefficientSurface surface;
    for (int k : which_coeffs) {
        for (const ConditionFit& fit : fits) {
            if (static_cast<std::size_t>(k) >= fit.coeffs.size()) {
                throw InvariantViolation("fit_coefficient_surface: coefficient p" +
                                         std::to_string(k) + " missing from a condition fit");
            }
        }
        // Stage 1: p_k vs v_dr, one quadratic per r_g value.
        std::vector<std::array<double, 3>> stage1(m2);
        std::vector<double> pk(m1);
        for (std::size_t ir = 0; ir < m2; ++ir) {
            for (std::size_t iv = 0; iv < m1; ++iv) {
                pk[iv] = fits[iv * m2 + ir].coeffs[static_cast<std::size_t>(k)];
            }
            const auto a = lls_polyfit(grid.v_dr_values, pk, 2, false);
            stage1[ir] = {a[0], a[1], a[2]};
        }
        // Stage 2: each a_x vs r_g.
        CoefficientSurface::Entry entry;
        entry.coeff_index = k;
        entry.force_b0_zero = force_b0_zero.count(k) > 0;
        std::vector<double> ax(m2);
        for (int x = 0; x < 3; ++x) {
            for (std::size_t ir = 0; ir < m2; ++ir) {
                ax[ir] = stage1[ir][static_cast<std::size_t>(x)];
            }
            const auto b = lls_polyfit(grid.r_g_values, ax, 2, entry.force_b0_zero);
            entry.b[static_cast<std::size_t>(x)] = {b[0], b[1], b[2]};
        }
        surface.entries.push_back(entry);
    }
    return surface;
}

std::vector<double> SurfacedModel::coeffs_at(double v_dr, double r_g) const {
    std::vector<double> out(coefficients.size());
    for (std::size_t k = 0; k < coefficients.size(); ++k) {
        const Coefficient& c = coefficients[k];
        if (c.kind == Coefficient::Kind::Surface) {
            const auto& b = c.surface.b;
            double a[3];
            for (int x = 0; x < 3; ++x) {
                a[x] = b[x][0] * r_g * r_g + b[x][1] * r_g + b[x][2];
            }
            out[k] = a[0] * v_dr * v_dr + a[1] * v_dr + a[2];
        } else {
            out[k] = c.constant;
        }
    }
    return out;
}

SurfacedModel build_surfaced_model(const Expr& model, const GridSpec& grid,
                                   std::span<const ConditionFit> fits,
                                   const std::set<int>& which_coeffs,
                                   const std::set<int>& force_b0_zero) {
    SurfacedModel sm;
    // Coefficient numbering follows the model as given: which_coeffs and the
    // stored fits refer to these indices, so no canonical renumbering here.
    sm.expr = model;
    sm.model = serialize(sm.expr);
    sm.per_condition.assign(fits.begin(), fits.end());

    const CoefficientSurface surface =
        fit_coefficient_surface(grid, fits, which_coeffs, force_b0_zero);

    const int n_coeff = sm.expr.coefficient_count();
    sm.coefficients.resize(static_cast<std::size_t>(n_coeff));
    for (int k = 0; k < n_coeff; ++k) {
        auto& slot = sm.coefficients[static_cast<std::size_t>(k)];
        if (const auto* entry = surface.find(k)) {
            slot.kind = SurfacedModel::Coefficient::Kind::Surface;
            slot.surface = *entry;
        } else {
            // Not surfaced: freeze to the across-condition mean.
            double sum = 0.0;
            for (const ConditionFit& fit : fits) {
                if (static_cast<std::size_t>(k) >= fit.coeffs.size()) {
                    throw InvariantViolation("surfaced model: coefficient p" +
                                             std::to_string(k) + " missing from a fit");
                }
                sum += fit.coeffs[static_cast<std::size_t>(k)];
            }
            slot.kind = SurfacedModel::Coefficient::Kind::Constant;
            slot.constant = sum / static_cast<double>(fits.size());
        }
    }
    return sm;
}

void save_surfaced_model(const SurfacedModel& sm, const std::string& path) {
    nlohmann::json doc;
    doc["format"] = "powergp-surfaced-model v1";
    doc["model"] = sm.model;
    nlohmann::json coeffs = nlohmann::json::array();
    for (std::size_t k = 0; k < sm.coefficients.size(); ++k) {
        const auto& c = sm.coefficients[k];
        nlohmann::json entry;
        entry["index"] = k;
        if (c.kind == SurfacedModel::Coefficient::Kind::Surface) {
            entry["kind"] = "surface";
            entry["force_b0_zero"] = c.surface.force_b0_zero;
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& row : c.surface.b) {
                rows.push_back({row[0], row[1], row[2]});
            }
            entry["b"] = rows;
        } else {
            entry["kind"] = "constant";
            entry["value"] = c.constant;
        }
        coeffs.push_back(entry);
    }
    doc["coefficients"] = coeffs;
    nlohmann::json fits = nlohmann::json::array();
    for (const ConditionFit& fit : sm.per_condition) {
        nlohmann::json f;
        f["condition_index"] = fit.condition_index;
        f["coeffs"] = fit.coeffs;
        f["chi_sq"] = fit.chi_sq;
        f["converged"] = fit.converged;
        f["singular_jacobian"] = fit.singular_jacobian;
        f["iterations"] = fit.iterations;
        fits.push_back(f);
    }
    doc["per_condition"] = fits;
    write_text_file(path, doc.dump(2) + "\n");
}

SurfacedModel load_surfaced_model(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("surfaced model '" + path + "': " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "powergp-surfaced-model v1") {
            throw ParseError("surfaced model '" + path + "': unknown format tag");
        }
        SurfacedModel sm;
        sm.model = doc.at("model").get<std::string>();
        sm.expr = parse_expr(sm.model);
        for (const auto& entry : doc.at("coefficients")) {
            SurfacedModel::Coefficient c;
            const auto kind = entry.at("kind").get<std::string>();
            if (kind == "surface") {
                c.kind = SurfacedModel::Coefficient::Kind::Surface;
                c.surface.coeff_index = entry.at("index").get<int>();
                c.surface.force_b0_zero = entry.at("force_b0_zero").get<bool>();
                const auto& rows = entry.at("b");
                if (!rows.is_array() || rows.size() != 3) {
                    throw ParseError("surfaced model: 'b' must be a 3x3 matrix");
                }
                for (int x = 0; x < 3; ++x) {
                    for (int col = 0; col < 3; ++col) {
                        c.surface.b[static_cast<std::size_t>(x)][static_cast<std::size_t>(col)] =
                            rows[static_cast<std::size_t>(x)].at(static_cast<std::size_t>(col))
                                .get<double>();
                    }
                }
            } else if (kind == "constant") {
                c.kind = SurfacedModel::Coefficient::Kind::Constant;
                c.constant = entry.at("value").get<double>();
            } else {
                throw ParseError("surfaced model: unknown coefficient kind '" + kind + "'");
            }
            sm.coefficients.push_back(c);
        }
        if (static_cast<int>(sm.coefficients.size()) != sm.expr.coefficient_count()) {
            throw ParseError("surfaced model: coefficient list does not match the model");
        }
        for (const auto& f : doc.at("per_condition")) {
            ConditionFit fit;
            fit.condition_index = f.at("condition_index").get<std::size_t>();
            fit.coeffs = f.at("coeffs").get<std::vector<double>>();
            fit.chi_sq = f.at("chi_sq").get<double>();
            fit.converged = f.at("converged").get<bool>();
            fit.singular_jacobian = f.at("singular_jacobian").get<bool>();
            fit.iterations = f.at("iterations").get<int>();
            sm.per_condition.push_back(std::move(fit));
        }
        return sm;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("surfaced model '" + path + "': " + e.what());
    }
}

} // namespace powergp
