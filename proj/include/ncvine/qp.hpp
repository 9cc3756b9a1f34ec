#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace ncvine {

/// minimize 1/2 x'Qx - c'x  subject to  Aeq x = beq,  Aineq x >= bineq.
struct QpProblem {
    Eigen::MatrixXd Q;
    Eigen::VectorXd c;
    Eigen::MatrixXd Aeq;
    Eigen::VectorXd beq;
    Eigen::MatrixXd Aineq;
    Eigen::VectorXd bineq;

    void validate() const;
};

struct QpSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd eq_multipliers;
    Eigen::VectorXd ineq_multipliers;  // >= 0, zero for inactive rows
    double objective = 0.0;
    int iterations = 0;
    int active_inequalities = 0;
};

class QpInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dual active-set method of Goldfarb and Idnani. Q must be positive
/// definite; a ridge of 1e-10 (relative) is added if its Cholesky fails.
QpSolution solve_qp(const QpProblem& p);

/// Largest violation among stationarity, primal feasibility, dual
/// feasibility and complementarity. Stationarity is scaled by max(1, |Q|,|c|).
double kkt_residual(const QpProblem& p, const QpSolution& s);

}  // namespace ncvine
