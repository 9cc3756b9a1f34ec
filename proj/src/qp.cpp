#include "ncvine/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ncvine {

void QpProblem::validate() const {
    const auto n = Q.rows();
    if (Q.cols() != n || c.size() != n)
        throw std::invalid_argument("QP: Q must be square and match c");
    if (Aeq.rows() != beq.size() || (Aeq.rows() > 0 && Aeq.cols() != n))
        throw std::invalid_argument("QP: equality system has inconsistent dimensions");
    if (Aineq.rows() != bineq.size() || (Aineq.rows() > 0 && Aineq.cols() != n))
        throw std::invalid_argument("QP: inequality system has inconsistent dimensions");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Working state of the dual method. J = L^{-T} Q_r where Q_r collects the
// accumulated Givens rotations; R is the triangular factor of the active
// constraint normals in that basis.
class DualActiveSet {
public:
    DualActiveSet(const QpProblem& p, const Eigen::MatrixXd& Linv_t)
        : p_(p), n_(p.Q.rows()), me_(p.Aeq.rows()), mi_(p.Aineq.rows()), Jinit_(Linv_t) {
        J_ = Jinit_;
        R_ = Eigen::MatrixXd::Zero(n_, n_);
        d_.resize(n_);
        z_.resize(n_);
        r_.resize(n_ + 1);
        u_ = Eigen::VectorXd::Zero(n_ + 1);
        active_.assign(n_ + 1, -1);
    }

    QpSolution run();

private:
    Eigen::VectorXd normal(int k) const {
        return k < me_ ? Eigen::VectorXd(p_.Aeq.row(k).transpose())
                       : Eigen::VectorXd(p_.Aineq.row(k - me_).transpose());
    }
    double rhs(int k) const { return k < me_ ? p_.beq[k] : p_.bineq[k - me_]; }

    void compute_direction(const Eigen::VectorXd& np) {
        d_ = J_.transpose() * np;
        z_ = J_.rightCols(n_ - iq_) * d_.tail(n_ - iq_);
        for (int i = iq_ - 1; i >= 0; --i) {
            double sum = d_[i];
            for (int j = i + 1; j < iq_; ++j)
                sum -= R_(i, j) * r_[j];
            r_[i] = sum / R_(i, i);
        }
    }

    bool add_constraint();
    void delete_constraint(int constraint);
    void rebuild(const std::vector<int>& active);

    const QpProblem& p_;
    Eigen::Index n_, me_, mi_;
    Eigen::MatrixXd Jinit_, J_, R_;
    Eigen::VectorXd d_, z_, r_, u_, x_;
    std::vector<int> active_;
    int iq_ = 0;
    double r_norm_ = 1.0;
};

bool DualActiveSet::add_constraint() {
    const double eps = std::numeric_limits<double>::epsilon();
    for (Eigen::Index j = n_ - 1; j >= iq_ + 1; --j) {
        double cc = d_[j - 1];
        double ss = d_[j];
        const double h = std::hypot(cc, ss);
        if (h == 0.0)
            continue;
        d_[j] = 0.0;
        ss /= h;
        cc /= h;
        if (cc < 0.0) {
            cc = -cc;
            ss = -ss;
            d_[j - 1] = -h;
        } else {
            d_[j - 1] = h;
        }
        const double xny = ss / (1.0 + cc);
        for (Eigen::Index k = 0; k < n_; ++k) {
            const double t1 = J_(k, j - 1);
            const double t2 = J_(k, j);
            J_(k, j - 1) = t1 * cc + t2 * ss;
            J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
        }
    }
    ++iq_;
    for (int i = 0; i < iq_; ++i)
        R_(i, iq_ - 1) = d_[i];
    if (std::abs(d_[iq_ - 1]) <= eps * r_norm_)
        return false;
    r_norm_ = std::max(r_norm_, std::abs(d_[iq_ - 1]));
    return true;
}

void DualActiveSet::delete_constraint(int constraint) {
    int qq = -1;
    for (int i = static_cast<int>(me_); i < iq_; ++i)
        if (active_[i] == constraint) {
            qq = i;
            break;
        }
    if (qq < 0)
        throw std::logic_error("QP: dropping a constraint that is not active");

    for (int i = qq; i < iq_ - 1; ++i) {
        active_[i] = active_[i + 1];
        u_[i] = u_[i + 1];
        R_.col(i) = R_.col(i + 1);
    }
    active_[iq_ - 1] = active_[iq_];
    u_[iq_ - 1] = u_[iq_];
    active_[iq_] = -1;
    u_[iq_] = 0.0;
    R_.col(iq_ - 1).setZero();
    --iq_;
    if (iq_ == 0)
        return;

    for (int j = qq; j < iq_; ++j) {
        double cc = R_(j, j);
        double ss = R_(j + 1, j);
        const double h = std::hypot(cc, ss);
        if (h == 0.0)
            continue;
        cc /= h;
        ss /= h;
        R_(j + 1, j) = 0.0;
        if (cc < 0.0) {
            R_(j, j) = -h;
            cc = -cc;
            ss = -ss;
        } else {
            R_(j, j) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = j + 1; k < iq_; ++k) {
            const double t1 = R_(j, k);
            const double t2 = R_(j + 1, k);
            R_(j, k) = t1 * cc + t2 * ss;
            R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
        }
        for (Eigen::Index k = 0; k < n_; ++k) {
            const double t1 = J_(k, j);
            const double t2 = J_(k, j + 1);
            J_(k, j) = t1 * cc + t2 * ss;
            J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
        }
    }
}

void DualActiveSet::rebuild(const std::vector<int>& active) {
    J_ = Jinit_;
    R_.setZero();
    iq_ = 0;
    r_norm_ = 1.0;
    for (int k : active) {
        d_ = J_.transpose() * normal(k);
        active_[iq_] = k;
        if (!add_constraint())
            throw std::runtime_error("QP: could not restore the active set");
    }
}

QpSolution DualActiveSet::run() {
    const double eps = std::numeric_limits<double>::epsilon();
    x_ = J_ * (J_.transpose() * p_.c);  // unconstrained minimizer Q^{-1} c

    QpSolution sol;

    for (int i = 0; i < me_; ++i) {
        const Eigen::VectorXd np = normal(i);
        compute_direction(np);
        const double zn = z_.dot(np);
        double t2 = 0.0;
        if (z_.squaredNorm() > eps)
            t2 = (rhs(i) - np.dot(x_)) / zn;
        x_ += t2 * z_;
        u_[iq_] = t2;
        u_.head(iq_) -= t2 * r_.head(iq_);
        active_[iq_] = i;
        if (!add_constraint())
            throw std::invalid_argument("QP: equality constraints are linearly dependent");
    }

    const double feas_scale =
        1e-12 * std::max(1.0, mi_ > 0 ? p_.Aineq.cwiseAbs().maxCoeff() : 1.0) *
        std::max(1.0, x_.cwiseAbs().maxCoeff());
    std::vector<char> excluded(mi_, 0);
    std::vector<char> is_active(mi_, 0);
    Eigen::VectorXd s(mi_);
    const int max_iter = 50 * static_cast<int>(n_ + mi_ + 10);
    int iter = 0;

    while (true) {
        if (++iter > max_iter)
            throw std::runtime_error("QP: iteration limit reached");
        std::fill(is_active.begin(), is_active.end(), 0);
        for (int i = static_cast<int>(me_); i < iq_; ++i)
            is_active[active_[i] - me_] = 1;
        std::fill(excluded.begin(), excluded.end(), 0);
        if (mi_ > 0)
            s = p_.Aineq * x_ - p_.bineq;
        const double tol = feas_scale * std::max(1.0, x_.cwiseAbs().maxCoeff());
        const std::vector<int> old_active(active_.begin() + me_, active_.begin() + iq_);
        const Eigen::VectorXd old_u = u_;
        const Eigen::VectorXd old_x = x_;

    choose:
        int ip = -1;
        double worst = -tol;
        for (int i = 0; i < mi_; ++i)
            if (!is_active[i] && !excluded[i] && s[i] < worst) {
                worst = s[i];
                ip = i;
            }
        if (ip < 0)
            break;

        const int kip = static_cast<int>(me_) + ip;
        const Eigen::VectorXd np = normal(kip);
        u_[iq_] = 0.0;
        active_[iq_] = kip;

        while (true) {
            compute_direction(np);
            double t1 = kInf;
            int drop = -1;
            for (int k = static_cast<int>(me_); k < iq_; ++k)
                if (r_[k] > 0.0) {
                    const double ratio = u_[k] / r_[k];
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = active_[k];
                    }
                }
            const double zn = z_.dot(np);
            const double t2 = (z_.squaredNorm() > eps * eps && zn > 0.0) ? -s[ip] / zn : kInf;
            const double t = std::min(t1, t2);
            if (t >= kInf)
                throw QpInfeasible("QP: constraints are infeasible");

            if (t2 >= kInf) {
                u_.head(iq_) -= t * r_.head(iq_);
                u_[iq_] += t;
                is_active[drop - me_] = 0;
                delete_constraint(drop);
                continue;
            }

            x_ += t * z_;
            u_.head(iq_) -= t * r_.head(iq_);
            u_[iq_] += t;

            if (t == t2) {
                if (!add_constraint()) {
                    // ip is numerically dependent on the active set: skip it.
                    excluded[ip] = 1;
                    x_ = old_x;
                    u_ = old_u;
                    std::fill(is_active.begin(), is_active.end(), 0);
                    for (int k : old_active)
                        is_active[k - me_] = 1;
                    std::vector<int> all(active_.begin(), active_.begin() + me_);
                    all.insert(all.end(), old_active.begin(), old_active.end());
                    rebuild(all);
                    for (std::size_t k = 0; k < all.size(); ++k)
                        u_[k] = old_u[k];
                    for (std::size_t k = all.size(); k < static_cast<std::size_t>(u_.size()); ++k)
                        u_[k] = 0.0;
                    if (mi_ > 0)
                        s = p_.Aineq * x_ - p_.bineq;
                    goto choose;
                }
                is_active[ip] = 1;
                break;
            }

            is_active[drop - me_] = 0;
            delete_constraint(drop);
            s[ip] = np.dot(x_) - p_.bineq[ip];
        }
    }

    sol.x = x_;
    sol.iterations = iter;
    sol.eq_multipliers = Eigen::VectorXd::Zero(me_);
    sol.ineq_multipliers = Eigen::VectorXd::Zero(mi_);
    for (int k = 0; k < iq_; ++k) {
        if (active_[k] < me_)
            sol.eq_multipliers[active_[k]] = u_[k];
        else
            sol.ineq_multipliers[active_[k] - me_] = u_[k];
    }
    sol.active_inequalities = iq_ - static_cast<int>(me_);
    sol.objective = 0.5 * x_.dot(p_.Q * x_) - p_.c.dot(x_);
    return sol;
}

}  // namespace

QpSolution solve_qp(const QpProblem& p) {
    p.validate();
    const auto n = p.Q.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(p.Q);
    if (llt.info() != Eigen::Success) {
        const double scale = std::max(1.0, p.Q.diagonal().cwiseAbs().maxCoeff());
        double ridge = 1e-10 * scale;
        for (int attempt = 0; attempt < 6 && llt.info() != Eigen::Success; ++attempt, ridge *= 100.0)
            llt.compute(p.Q + ridge * Eigen::MatrixXd::Identity(n, n));
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("QP: objective is unbounded (Q not positive semidefinite)");
    }
    const Eigen::MatrixXd Linv =
        llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
    DualActiveSet solver(p, Linv.transpose());
    return solver.run();
}

double kkt_residual(const QpProblem& p, const QpSolution& s) {
    const double scale = std::max({1.0, p.Q.cwiseAbs().maxCoeff(), p.c.cwiseAbs().maxCoeff()});
    Eigen::VectorXd grad = p.Q * s.x - p.c;
    if (p.Aeq.rows() > 0)
        grad -= p.Aeq.transpose() * s.eq_multipliers;
    if (p.Aineq.rows() > 0)
        grad -= p.Aineq.transpose() * s.ineq_multipliers;
    double res = grad.cwiseAbs().maxCoeff() / scale;
    if (p.Aeq.rows() > 0)
        res = std::max(res, (p.Aeq * s.x - p.beq).cwiseAbs().maxCoeff());
    if (p.Aineq.rows() > 0) {
        const Eigen::VectorXd slack = p.Aineq * s.x - p.bineq;
        for (Eigen::Index i = 0; i < slack.size(); ++i) {
            res = std::max(res, -slack[i]);
            res = std::max(res, -s.ineq_multipliers[i]);
            res = std::max(res, std::abs(s.ineq_multipliers[i] * slack[i]) / scale);
        }
    }
    return res;
}

}  // namespace ncvine
