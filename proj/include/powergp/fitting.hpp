#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "powergp/dataset.hpp"
#include "powergp/expression.hpp"

namespace powergp {

struct ConditionFit {
    std::size_t condition_index = 0;
    std::vector<double> coeffs;
    double chi_sq = 0.0; // (1/n) sum of squared residuals
    bool converged = false;
    bool singular_jacobian = false;
    int iterations = 0;
};

struct FitOptions {
    int max_iterations = 200;
    double chi_rel_tol = 1e-10;     // relative chi^2 decrease on an accepted step
    double grad_tol = 1e-10;        // inf-norm of the chi^2 gradient
    double lambda_init = 1e-3;
    double lambda_shrink = 0.1;
    double lambda_grow = 10.0;
    double lambda_max = 1e14;
};

// One gate-drive condition's slice of the training set, as columns.
struct ConditionData {
    EvalColumns x;
    std::span<const double> y;
};

ConditionData condition_slice(const TrainingSet& ts, std::size_t condition_index,
                              std::vector<double>& fs_storage,
                              std::vector<double>& vin_storage,
                              std::vector<double>& d_storage,
                              std::vector<double>& rt_storage);

// Levenberg-Marquardt with a central-difference Jacobian
// (step = max(1e-6, 1e-6 |p_k|)). Accepted steps never increase chi^2.
// Rank-deficient Jacobians are reported via the singular_jacobian flag;
// the best iterate's chi^2 is still returned.
ConditionFit nlls_fit(const Expr& e, const ConditionData& data,
                      std::span<const double> p_init, const FitOptions& opt = {});

// sqrt of the mean of per-condition chi^2 values (each already carries 1/n).
double rmse(std::span<const double> chi_sqs);

struct ErrorStats {
    double mu_err = 0.0;    // mean relative percent error
    double sigma_err = 0.0; // population standard deviation
    double err_max = 0.0;   // max absolute percent error
    std::vector<double> errors; // ordered by condition j, then point i
};

ErrorStats percent_errors(const Expr& e, std::span<const ConditionFit> fits,
                          const TrainingSet& ts);

// Polynomial linear least squares (degree 1 or 2) solved by Householder QR.
// Coefficients are returned highest degree first; with force_leading_zero the
// leading term is constrained to zero and reported as such.
std::vector<double> lls_polyfit(std::span<const double> x, std::span<const double> y,
                                int degree, bool force_leading_zero = false);

// Two-stage polynomial surface p_k(v_dr, r_g): stage 1 fits p_k against v_dr
// (quadratic) per r_g value, stage 2 fits each of the three stage-1
// coefficients against r_g (quadratic, optionally with the leading term
// pinned to zero).
struct CoefficientSurface {
    struct Entry {
        int coeff_index = 0;
        bool force_b0_zero = false;
        // b[x] = {b0, b1, b2} for stage-1 coefficient a_x, x in {0, 1, 2}.
        std::array<std::array<double, 3>, 3> b{};
    };
    std::vector<Entry> entries;

    [[nodiscard]] const Entry* find(int coeff_index) const;
    [[nodiscard]] double evaluate(int coeff_index, double v_dr, double r_g) const;
};

CoefficientSurface fit_coefficient_surface(const GridSpec& grid,
                                           std::span<const ConditionFit> fits,
                                           const std::set<int>& which_coeffs,
                                           const std::set<int>& force_b0_zero);

// A model plus everything needed to evaluate it at any gate-drive condition:
// surfaced coefficients use the two-stage polynomials, the rest are fixed to
// their across-condition mean. The per-condition fits travel along for
// provenance and for direct (non-surfaced) validation.
struct SurfacedModel {
    std::string model; // canonical string
    Expr expr;
    struct Coefficient {
        enum class Kind { Surface, Constant } kind = Kind::Constant;
        CoefficientSurface::Entry surface;
        double constant = 0.0;
    };
    std::vector<Coefficient> coefficients;
    std::vector<ConditionFit> per_condition;

    [[nodiscard]] std::vector<double> coeffs_at(double v_dr, double r_g) const;
};

SurfacedModel build_surfaced_model(const Expr& model, const GridSpec& grid,
                                   std::span<const ConditionFit> fits,
                                   const std::set<int>& which_coeffs,
                                   const std::set<int>& force_b0_zero);

void save_surfaced_model(const SurfacedModel& sm, const std::string& path);
SurfacedModel load_surfaced_model(const std::string& path);

} // namespace powergp
