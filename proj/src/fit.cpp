#include "ncvine/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace ncvine {

namespace {

constexpr double kLogFloor = 1e-300;

ConstraintSet make_constraints(const SparseBasisSpec& spec) {
    const auto& idx = sparse_index(spec);
    const int m = idx.size();
    const auto knots = knot_grid(spec.d).knots;
    const int K = static_cast<int>(knots.size());
    const Eigen::MatrixXd Hk = hierarchical_basis(knots, spec.d);  // K x K

    // Margin of coordinate j integrated out: each hierarchical column
    // integrates to one, so the margin is the remaining product evaluated
    // on the knot grid of the other coordinates. For q = 3 only the two
    // copula arguments (0 and 1) are integrated out.
    std::vector<Eigen::RowVectorXd> rows;
    for (int out = 0; out < 2; ++out) {
        std::vector<int> rest;
        for (int j = 0; j < spec.q; ++j)
            if (j != out)
                rest.push_back(j);
        const int grid = rest.size() == 1 ? K : K * K;
        for (int g = 0; g < grid; ++g) {
            const int a = rest.size() == 1 ? g : g / K;
            const int b = rest.size() == 1 ? 0 : g % K;
            Eigen::RowVectorXd row(m);
            for (int c = 0; c < m; ++c) {
                const auto& mi = idx.multi[c];
                double v = Hk(a, mi[rest[0]]);
                if (rest.size() == 2)
                    v *= Hk(b, mi[rest[1]]);
                row[c] = v;
            }
            rows.push_back(std::move(row));
        }
    }

    ConstraintSet cs;
    cs.raw_equalities = static_cast<int>(rows.size());
    Eigen::MatrixXd raw(rows.size(), m);
    for (std::size_t i = 0; i < rows.size(); ++i)
        raw.row(i) = rows[i];

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(raw.transpose());
    qr.setThreshold(1e-10);
    const auto rank = qr.rank();
    std::vector<int> keep;
    for (Eigen::Index i = 0; i < rank; ++i)
        keep.push_back(static_cast<int>(qr.colsPermutation().indices()[i]));
    std::sort(keep.begin(), keep.end());
    cs.Aeq.resize(rank, m);
    for (Eigen::Index i = 0; i < rank; ++i)
        cs.Aeq.row(i) = raw.row(keep[i]);
    cs.beq = Eigen::VectorXd::Ones(rank);

    int points = 1;
    for (int j = 0; j < spec.q; ++j)
        points *= K;
    cs.Aineq.resize(points, m);
    for (int g = 0; g < points; ++g) {
        std::array<int, 3> node{0, 0, 0};
        int rest = g;
        for (int j = spec.q - 1; j >= 0; --j) {
            node[j] = rest % K;
            rest /= K;
        }
        for (int c = 0; c < m; ++c) {
            const auto& mi = idx.multi[c];
            double v = 1.0;
            for (int j = 0; j < spec.q; ++j)
                v *= Hk(node[j], mi[j]);
            cs.Aineq(g, c) = v;
        }
    }
    cs.bineq = Eigen::VectorXd::Zero(points);
    return cs;
}

double quad(const Eigen::VectorXd& b, const Eigen::MatrixXd& P) {
    return b.dot(P * b);
}

}  // namespace

void FitConfig::validate() const {
    if (lambda_starts.empty())
        throw std::invalid_argument("FitConfig: at least one lambda start is required");
    for (double l : lambda_starts)
        if (!(l > 0.0))
            throw std::invalid_argument("FitConfig: lambda starts must be positive");
    if (!(tol_coeff > 0.0) || !(tol_lambda > 0.0) || max_outer_iters < 1)
        throw std::invalid_argument("FitConfig: tolerances and iteration limit must be positive");
    if (!(lambda_cap > lambda_floor))
        throw std::invalid_argument("FitConfig: lambda_cap must exceed lambda_floor");
}

const ConstraintSet& build_constraints(const SparseBasisSpec& spec) {
    spec.validate();
    static std::mutex mutex;
    static std::map<std::array<int, 3>, std::unique_ptr<ConstraintSet>> cache;
    const std::array<int, 3> key{spec.d, spec.D, spec.q};
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_unique<ConstraintSet>(make_constraints(spec))).first;
    return *it->second;
}

Eigen::VectorXd independence_coeffs(const SparseBasisSpec& spec) {
    const auto& idx = sparse_index(spec);
    // level-0 hats 2(1-u) and 2u average to one in every coordinate
    const double value = std::pow(0.5, spec.q);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(idx.size());
    for (int c = 0; c < idx.size(); ++c) {
        bool level0 = true;
        for (int j = 0; j < spec.q; ++j)
            level0 = level0 && idx.multi[c][j] < 2;
        if (level0)
            b[c] = value;
    }
    return b;
}

PenaltyEigen positive_eigensystem(const Eigen::MatrixXd& P) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    PenaltyEigen out;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > tol)
            keep.push_back(i);
    out.vectors.resize(P.rows(), static_cast<Eigen::Index>(keep.size()));
    out.values.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        out.vectors.col(c) = es.eigenvectors().col(keep[c]);
        out.values[c] = ev[keep[c]];
    }
    out.null_dim = static_cast<int>(P.rows()) - static_cast<int>(keep.size());
    return out;
}

Eigen::MatrixXd observed_information(const Eigen::MatrixXd& basis, const Eigen::VectorXd& coeffs) {
    const Eigen::VectorXd dens = basis * coeffs;
    const Eigen::MatrixXd X = dens.cwiseInverse().asDiagonal() * basis;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(basis.cols(), basis.cols());
    H.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    return H.selfadjointView<Eigen::Lower>();
}

RemlUpdate reml_update(const Eigen::VectorXd& b_hat, const Eigen::MatrixXd& unit_penalty,
                       const PenaltyEigen& eig, double lambda, const Eigen::MatrixXd& hess0,
                       double lambda_cap) {
    RemlUpdate out;
    out.quadratic = quad(b_hat, unit_penalty);
    const Eigen::MatrixXd UHU = eig.vectors.transpose() * hess0 * eig.vectors;
    Eigen::MatrixXd M = UHU;
    M.diagonal() += lambda * eig.values;
    out.trace = M.ldlt().solve(UHU).trace();
    if (out.quadratic < 1e-14) {
        out.lambda = lambda_cap;
        out.capped = true;
        return out;
    }
    out.lambda = out.trace / out.quadratic;
    if (!(out.lambda <= lambda_cap)) {
        out.lambda = lambda_cap;
        out.capped = true;
    }
    return out;
}

RemlUpdate reml_update(const Eigen::VectorXd& b_hat, const PenaltyMatrix& penalty,
                       const Eigen::MatrixXd& hess0, double lambda_cap) {
    return reml_update(b_hat, *penalty.unit, *penalty.eigen, penalty.lambda, hess0, lambda_cap);
}

double effective_df(const Eigen::MatrixXd& hess_pen_lambda, const Eigen::MatrixXd& hess_pen_zero) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(hess_pen_lambda);
    if (!lu.isInvertible())
        throw std::domain_error("effective_df: penalized Hessian is singular");
    return lu.solve(hess_pen_zero).trace();
}

double caic(double loglik, double df, int n) {
    const double denom = n - df - 1.0;
    if (!(denom > 0.0))
        throw std::domain_error("caic: n - df - 1 must be positive");
    return -2.0 * loglik + 2.0 * df + 2.0 * df * (df + 1.0) / denom;
}

DesignFit fit_design(const DensityDesign& design, const FitConfig& config) {
    config.validate();
    const Eigen::MatrixXd& Phi = design.basis;
    const Eigen::MatrixXd& P = design.penalty;
    const int n = static_cast<int>(Phi.rows());

    auto loglik_of = [&](const Eigen::VectorXd& dens) {
        return dens.array().log().sum();
    };

    const Eigen::MatrixXd& Aeq = design.constraints.Aeq;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(Phi.cols(), Phi.cols());
    if (Aeq.rows() > 0) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(Aeq.transpose());
        const Eigen::MatrixXd full = qr.householderQ();
        Z = full.rightCols(Phi.cols() - Aeq.rows());
    }
    const Eigen::MatrixXd AZ = design.constraints.Aineq * Z;

    DesignFit best;
    best.caic = std::numeric_limits<double>::infinity();
    bool have_best = false;

    for (double lambda0 : config.lambda_starts) {
        DesignFit cur;
        Eigen::VectorXd b = design.start;
        double lambda = lambda0;
        Eigen::VectorXd dens = Phi * b;
        if (dens.minCoeff() <= 0.0)
            throw std::invalid_argument("fit: starting density is not positive at the data");
        double pen = loglik_of(dens) - 0.5 * lambda * quad(b, P);
        Eigen::MatrixXd H0 = observed_information(Phi, b);
        bool saturated = false;

        for (int it = 1; it <= config.max_outer_iters; ++it) {
            cur.iterations = it;
            const Eigen::VectorXd grad = Phi.transpose() * dens.cwiseInverse();
            const Eigen::MatrixXd Q = H0 + lambda * P;
            // step z in the null space of the equalities: b + Z z keeps them exact
            QpProblem qp;
            qp.Q = Z.transpose() * Q * Z;
            qp.c = Z.transpose() * (grad - lambda * (P * b));
            qp.Aeq.resize(0, Z.cols());
            qp.beq.resize(0);
            qp.Aineq = AZ;
            qp.bineq = design.constraints.bineq - design.constraints.Aineq * b;

            Eigen::VectorXd target;
            try {
                target = b + Z * solve_qp(qp).x;
            } catch (const QpInfeasible&) {
                break;
            }

            Eigen::VectorXd next = b;
            Eigen::VectorXd next_dens = dens;
            double next_pen = pen;
            double t = 1.0;
            for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
                const Eigen::VectorXd trial = b + t * (target - b);
                const Eigen::VectorXd trial_dens = Phi * trial;
                // fraction to the boundary: no data point loses more than 99% of its density per step
                if ((trial_dens.array() < 0.01 * dens.array()).any())
                    continue;
                const double trial_pen = loglik_of(trial_dens) - 0.5 * lambda * quad(trial, P);
                if (trial_pen >= pen - 1e-12 * std::max(1.0, std::abs(pen))) {
                    next = trial;
                    next_dens = trial_dens;
                    next_pen = trial_pen;
                    break;
                }
            }

            const Eigen::MatrixXd next_H0 = observed_information(Phi, next);
            double next_lambda = lambda;
            if (config.update_lambda) {
                const auto upd = reml_update(next, P, design.penalty_eigen, lambda, next_H0,
                                             config.lambda_cap);
                next_lambda = std::max(upd.lambda, config.lambda_floor);
                cur.lambda_capped = upd.capped;
                saturated = upd.capped || upd.trace < config.saturation_trace;
            }

            const double coeff_change = (next - b).norm() / std::max(b.norm(), 1e-300);
            const double lambda_change = std::abs(next_lambda - lambda) / lambda;

            b = std::move(next);
            dens = std::move(next_dens);
            H0 = next_H0;
            cur.step_gains.push_back(next_pen - pen);
            lambda = next_lambda;
            pen = loglik_of(dens) - 0.5 * lambda * quad(b, P);

            if (coeff_change < config.tol_coeff &&
                (!config.update_lambda || lambda_change < config.tol_lambda || saturated)) {
                cur.converged = true;
                break;
            }
        }

        cur.coeffs = b;
        cur.lambda = lambda;
        cur.loglik = loglik_of(dens);
        cur.penalized_loglik = pen;
        try {
            cur.df = effective_df(H0 + lambda * P, H0);
        } catch (const std::domain_error&) {
            cur.df = std::numeric_limits<double>::quiet_NaN();
        }
        const double denom = n - cur.df - 1.0;
        cur.caic = denom > 0.0 ? caic(cur.loglik, cur.df, n) : std::numeric_limits<double>::infinity();
        if (!have_best || cur.caic < best.caic) {
            best = cur;
            have_best = true;
        }
    }
    return best;
}

CopulaFit fit_copula_density(const Eigen::MatrixXd& pseudo_obs, const SparseBasisSpec& spec,
                             const FitConfig& config) {
    spec.validate();
    if (pseudo_obs.cols() != spec.q)
        throw std::invalid_argument("fit: expected " + std::to_string(spec.q) + " columns, got " +
                                    std::to_string(pseudo_obs.cols()));
    if (pseudo_obs.rows() < 2)
        throw std::invalid_argument("fit: need at least two observations");
    if (pseudo_obs.minCoeff() < 0.0 || pseudo_obs.maxCoeff() > 1.0)
        throw std::domain_error("fit: pseudo-observations must lie in [0,1]");

    const PenaltyMatrix pen = assemble_penalty(spec, config.penalty_order, 1.0);
    DensityDesign design{sparse_tensor_basis(pseudo_obs, spec).values, build_constraints(spec),
                         *pen.unit, *pen.eigen, independence_coeffs(spec)};
    const DesignFit df = fit_design(design, config);

    CopulaFit out;
    out.spec = spec;
    out.coeffs = df.coeffs;
    out.lambda = df.lambda;
    out.loglik = df.loglik;
    out.penalized_loglik = df.penalized_loglik;
    out.df = df.df;
    out.caic = df.caic;
    out.n = static_cast<int>(pseudo_obs.rows());
    out.iterations = df.iterations;
    out.converged = df.converged;
    out.lambda_capped = df.lambda_capped;
    if (2 * out.n < out.coeffs.size())
        out.warning = "sample size below half the basis dimension";
    return out;
}

double copula_loglik(const CopulaFit& fit, const Eigen::MatrixXd& points) {
    const Eigen::VectorXd dens = sparse_tensor_basis(points, fit.spec).values * fit.coeffs;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < dens.size(); ++i)
        sum += std::log(std::max(dens[i], kLogFloor));
    return sum;
}

}  // namespace ncvine
