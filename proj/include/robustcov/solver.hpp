#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace robustcov::solver {

enum class SolveStatus { Optimal, Infeasible, MaxIter };
std::string status_name(SolveStatus status);

/// Rockafellar-Uryasev CVaR cap: expected loss beyond the alpha-quantile
/// must not exceed beta (per period, fractional loss).
struct CvarConstraint {
    double alpha; // confidence in (0,1)
    double beta;  // loss bound, > 0
};

/**
 * @brief Minimum-variance problem with an L1 turnover penalty and optional
 * CVaR caps.
 *
 *   minimize  w'Vw + lambda * |w - w0|_1
 *   s.t.      sum(w) = 1
 *             CVaR_alpha_j(-R w) <= beta_j   for each constraint j
 *
 * Scenario losses are -r_t'w, so positive losses are bad outcomes.
 * w0 must sum to 1 (within 1e-8) or be the zero vector (cold start).
 */
struct MinVarProblem {
    Eigen::MatrixXd V;  // N x N SPD
    Eigen::VectorXd w0; // prior weights
    double lambda = 0.0050;
    std::vector<CvarConstraint> cvar_constraints;
    Eigen::MatrixXd scenarios; // T x N returns; required iff constraints present
};

struct Solution {
    Eigen::VectorXd weights;
    double objective = 0.0; // w'Vw + lambda |w - w0|_1
    std::vector<double> aux_l; // optimal VaR level per CVaR constraint
    SolveStatus status = SolveStatus::Optimal;
    double kkt_residual = 0.0;
    int iterations = 0;

    /// Minimum achievable CVaR per constraint, filled when status is
    /// Infeasible so callers can degrade gracefully.
    std::vector<double> min_achievable_cvar;

    // Full primal-dual state in the solver's epigraph formulation, kept so
    // verify_kkt can recompute residuals independently of the solve path.
    Eigen::VectorXd x_full;
    Eigen::VectorXd z_ineq;
    Eigen::VectorXd s_slack;
    double y_eq = 0.0;
};

/// Exact analytic minimum-variance weights V^{-1}e / (e'V^{-1}e).
/// Throws NotSpd when V is not symmetric positive definite.
Eigen::VectorXd minvar_closed_form(const Eigen::MatrixXd& V);

/// Interior-point solve of the L1-penalized problem (no CVaR constraints
/// allowed on this entry point).
Solution solve_minvar_l1(const MinVarProblem& problem);

/// (CVaR, VaR) of a loss sample at confidence alpha: the minimum over l of
/// l + E[max(loss - l, 0)]/(1-alpha) and its smallest minimizer.
std::pair<double, double> empirical_cvar(const Eigen::VectorXd& losses, double alpha);

/// Interior-point solve with CVaR constraints via the linear
/// Rockafellar-Uryasev reformulation. Feasibility is certified by an
/// auxiliary minimum-overshoot solve before reporting Infeasible.
Solution solve_minvar_cvar(const MinVarProblem& problem);

struct KktReport {
    double stationarity = 0.0;      // |Px + q + a y + G'z|_inf
    double primal_equality = 0.0;   // |sum(w) - 1|
    double primal_inequality = 0.0; // max violation of Gx <= h
    double dual_feasibility = 0.0;  // max(0, -min z)
    double complementarity = 0.0;   // max |s_i z_i|
    double max_residual() const;
};

/// Recomputes KKT residuals of a returned solution from first principles
/// (dense rebuild of the epigraph formulation), independent of the solver's
/// internal bookkeeping.
KktReport verify_kkt(const MinVarProblem& problem, const Solution& solution);

} // namespace robustcov::solver
