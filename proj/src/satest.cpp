#include "ncvine/satest.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ncvine {

namespace {

struct GroupSummary {
    Eigen::Vector2d est;
    Eigen::Matrix2d cov;
};

// Kendall's tau and the lower-quadrant frequency of one group, with the
// delete-one jackknife covariance of the pair.
GroupSummary summarize(const std::vector<double>& u, const std::vector<double>& v) {
    const std::size_t n = u.size();
    std::vector<double> row(n, 0.0);
    double S = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = (u[i] - u[j]) * (v[i] - v[j]);
            const double s = a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
            row[i] += s;
            row[j] += s;
            S += s;
        }
    std::vector<double> ind(n);
    double Q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ind[i] = (u[i] <= 0.5 && v[i] <= 0.5) ? 1.0 : 0.0;
        Q += ind[i];
    }
    const double dn = static_cast<double>(n);
    GroupSummary g;
    g.est = {2.0 * S / (dn * (dn - 1.0)), Q / dn};

    Eigen::MatrixXd loo(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        loo(i, 0) = 2.0 * (S - row[i]) / ((dn - 1.0) * (dn - 2.0));
        loo(i, 1) = (Q - ind[i]) / (dn - 1.0);
    }
    const Eigen::RowVector2d mean = loo.colwise().mean();
    const Eigen::MatrixXd c = loo.rowwise() - mean;
    g.cov = (dn - 1.0) / dn * (c.transpose() * c);
    return g;
}

}  // namespace

SaTestResult test_simplifying(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                              const Eigen::VectorXd& cond, double alpha, int groups) {
    const Eigen::Index n = u.size();
    if (v.size() != n || cond.size() != n)
        throw std::invalid_argument("test_simplifying: length mismatch");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("test_simplifying: alpha must lie in (0,1)");
    if (groups < 2)
        throw std::invalid_argument("test_simplifying: need at least two groups");
    if (n < static_cast<Eigen::Index>(groups) * kMinGroupSize)
        throw std::invalid_argument("test_simplifying: fewer than 50 observations per group");

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return cond[a] < cond[b]; });

    SaTestResult res;
    res.alpha = alpha;
    res.groups.count = groups;
    std::vector<GroupSummary> sums;
    for (int g = 0; g < groups; ++g) {
        const Eigen::Index lo = n * g / groups, hi = n * (g + 1) / groups;
        std::vector<double> gu, gv;
        for (Eigen::Index k = lo; k < hi; ++k) {
            gu.push_back(u[order[k]]);
            gv.push_back(v[order[k]]);
        }
        sums.push_back(summarize(gu, gv));
        res.groups.sizes.push_back(static_cast<int>(hi - lo));
        res.groups.tau.push_back(sums.back().est[0]);
        res.groups.quadrant.push_back(sums.back().est[1]);
        if (g + 1 < groups)
            res.groups.cuts.push_back(cond[order[hi - 1]]);
    }

    // contrasts against the first group
    const int m = 2 * (groups - 1);
    Eigen::VectorXd D(m);
    Eigen::MatrixXd V(m, m);
    for (int g = 1; g < groups; ++g) {
        D.segment<2>(2 * (g - 1)) = sums[g].est - sums[0].est;
        for (int h = 1; h < groups; ++h) {
            Eigen::Matrix2d b = sums[0].cov;
            if (g == h)
                b += sums[g].cov;
            V.block<2, 2>(2 * (g - 1), 2 * (h - 1)) = b;
        }
    }
    // pseudo-inverse on the numerically nonzero spectrum
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V);
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    double stat = 0.0;
    int rank = 0;
    for (int k = 0; k < m; ++k) {
        const double ev = es.eigenvalues()[k];
        if (ev > 1e-12 * top && ev > 0.0) {
            const double proj = es.eigenvectors().col(k).dot(D);
            stat += proj * proj / ev;
            ++rank;
        }
    }
    res.statistic = stat;
    res.df = rank;
    if (rank == 0) {
        res.pvalue = 1.0;
    } else {
        const boost::math::chi_squared chi(rank);
        res.pvalue = boost::math::cdf(boost::math::complement(chi, stat));
    }
    res.reject = res.pvalue < alpha;
    return res;
}

}  // namespace ncvine
