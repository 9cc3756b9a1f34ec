#pragma once

#include "ncvine/basis.hpp"
#include "ncvine/penalty.hpp"
#include "ncvine/qp.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ncvine {

/// Linear side conditions of a copula density on a sparse basis:
/// uniform margins (equalities, redundant rows removed) and
/// nonnegativity on the full knot grid (inequalities).
struct ConstraintSet {
    Eigen::MatrixXd Aeq;
    Eigen::VectorXd beq;
    Eigen::MatrixXd Aineq;
    Eigen::VectorXd bineq;
    int raw_equalities = 0;
};

struct FitConfig {
    std::vector<double> lambda_starts{0.1, 1.0, 10.0};
    int max_outer_iters = 50;
    double tol_coeff = 1e-6;
    double tol_lambda = 1e-4;
    double lambda_cap = 1e12;
    double lambda_floor = 1e-8;
    /// lambda counts as settled once tr S(lambda) drops below this: the
    /// penalized directions are then fully shrunk and larger values change nothing.
    double saturation_trace = 1e-3;
    int penalty_order = 1;
    /// When false, lambda stays at each start value (no REML update).
    bool update_lambda = true;

    void validate() const;
};

struct CopulaFit {
    SparseBasisSpec spec;
    Eigen::VectorXd coeffs;
    double lambda = 0.0;
    double loglik = 0.0;     // unpenalized
    double penalized_loglik = 0.0;
    double df = 0.0;
    double caic = 0.0;
    int n = 0;
    int iterations = 0;
    bool converged = false;
    bool lambda_capped = false;
    std::string warning;

    bool conditional() const { return spec.q == 3; }
};

/// A penalized density problem in some coordinate system: basis rows at
/// the data, side conditions, unit penalty and a feasible strictly
/// positive starting point. `fit_design` is the estimator core.
struct DensityDesign {
    Eigen::MatrixXd basis;  // n x m
    ConstraintSet constraints;
    Eigen::MatrixXd penalty;  // unit lambda
    PenaltyEigen penalty_eigen;
    Eigen::VectorXd start;
};

struct DesignFit {
    Eigen::VectorXd coeffs;
    double lambda = 0.0;
    double loglik = 0.0;
    double penalized_loglik = 0.0;
    double df = 0.0;
    double caic = 0.0;
    int iterations = 0;
    bool converged = false;
    bool lambda_capped = false;
    /// Gain in penalized log-likelihood of each accepted step at fixed lambda.
    std::vector<double> step_gains;
};

struct RemlUpdate {
    double lambda = 0.0;
    bool capped = false;
    double trace = 0.0;      // tr S(lambda)
    double quadratic = 0.0;  // b' P b at unit lambda
};

/// Side conditions for `spec` (cached, immutable).
const ConstraintSet& build_constraints(const SparseBasisSpec& spec);

/// Coefficients of the independence copula (density identically one).
Eigen::VectorXd independence_coeffs(const SparseBasisSpec& spec);

/// Positive eigen-system of a symmetric PSD matrix (relative cut 1e-10).
PenaltyEigen positive_eigensystem(const Eigen::MatrixXd& P);

/// Observed information sum_i phi_i phi_i' / c_i^2 of the log-likelihood.
Eigen::MatrixXd observed_information(const Eigen::MatrixXd& basis, const Eigen::VectorXd& coeffs);

/// One REML fixed-point step: 1/lambda = b'Pb / tr S(lambda) with
/// S(lambda) = (U'H0U + lambda*Lambda)^-1 U'H0U on the positive
/// eigen-system (U, Lambda) of the unit penalty.
RemlUpdate reml_update(const Eigen::VectorXd& b_hat, const PenaltyMatrix& penalty,
                       const Eigen::MatrixXd& hess0, double lambda_cap = 1e12);

/// Same update for an explicit unit penalty and eigen-system.
RemlUpdate reml_update(const Eigen::VectorXd& b_hat, const Eigen::MatrixXd& unit_penalty,
                       const PenaltyEigen& eig, double lambda, const Eigen::MatrixXd& hess0,
                       double lambda_cap = 1e12);

/// tr[H_pen(lambda)^-1 H_pen(0)].
double effective_df(const Eigen::MatrixXd& hess_pen_lambda, const Eigen::MatrixXd& hess_pen_zero);

/// Corrected AIC: -2 loglik + 2 df + 2 df (df+1) / (n - df - 1).
double caic(double loglik, double df, int n);

DesignFit fit_design(const DensityDesign& design, const FitConfig& config);

/// Penalized maximum-likelihood copula density on a sparse basis.
/// `pseudo_obs` is n x q with entries in [0,1]; for q = 3 the last
/// column is the conditioning variable.
CopulaFit fit_copula_density(const Eigen::MatrixXd& pseudo_obs, const SparseBasisSpec& spec,
                             const FitConfig& config = {});

/// Sum of log densities at the rows of `points` (floored at 1e-300).
double copula_loglik(const CopulaFit& fit, const Eigen::MatrixXd& points);

}  // namespace ncvine
