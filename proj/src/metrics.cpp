#include "ncvine/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ncvine {

KlResult kl_oos(const Eigen::VectorXd& log_true, const Eigen::VectorXd& log_fit, bool exclude_nonfinite) {
    if (log_true.size() != log_fit.size())
        throw std::invalid_argument("kl_oos: length mismatch");
    KlResult r;
    double s = 0.0;
    for (Eigen::Index i = 0; i < log_true.size(); ++i) {
        if (!std::isfinite(log_true[i]) || !std::isfinite(log_fit[i])) {
            ++r.n_nonfinite;
            continue;
        }
        s += log_true[i] - log_fit[i];
        ++r.n_used;
    }
    if (r.n_nonfinite > 0 && !exclude_nonfinite)
        throw std::domain_error("kl_oos: " + std::to_string(r.n_nonfinite) +
                                " non-finite log-density values");
    if (r.n_used == 0)
        throw std::invalid_argument("kl_oos: no evaluation points");
    r.value = s / r.n_used;
    return r;
}

KlResult kl_oos(const LogDensity& log_true, const LogDensity& log_fit, const Eigen::MatrixXd& points,
                bool exclude_nonfinite) {
    Eigen::VectorXd a(points.rows()), b(points.rows());
    std::vector<double> row(points.cols());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (Eigen::Index j = 0; j < points.cols(); ++j)
            row[j] = points(i, j);
        a[i] = log_true(row);
        b[i] = log_fit(row);
    }
    return kl_oos(a, b, exclude_nonfinite);
}

double posterior_prob(double logf0, double logf1, double pi0, std::string* warning) {
    if (!(pi0 > 0.0 && pi0 < 1.0))
        throw std::invalid_argument("posterior_prob: pi0 must lie in (0,1)");
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    if (logf0 == ninf && logf1 == ninf) {
        if (warning)
            *warning = "both class densities are zero";
        return 0.5;
    }
    // pi0 f0 / (pi0 f0 + pi1 f1) = 1 / (1 + exp(d))
    const double d = std::log1p(-pi0) + logf1 - (std::log(pi0) + logf0);
    if (d > 0.0) {
        const double e = std::exp(-d);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(d));
}

std::vector<RocPoint> roc_points(const Eigen::VectorXd& posteriors, const Eigen::VectorXi& labels) {
    const Eigen::Index n = posteriors.size();
    if (labels.size() != n)
        throw std::invalid_argument("roc_points: length mismatch");
    int n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[i] == 0)
            ++n0;
        else if (labels[i] == 1)
            ++n1;
        else
            throw std::invalid_argument("roc_points: labels must be 0 or 1");
    }
    if (n0 == 0 || n1 == 0)
        throw std::invalid_argument("roc_points: both classes must be present");

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return posteriors[a] > posteriors[b]; });
    std::vector<RocPoint> out{{0.0, 0.0, 0.0}};
    int c0 = 0, c1 = 0;
    for (Eigen::Index k = 0; k < n;) {
        const double t = posteriors[order[k]];
        for (; k < n && posteriors[order[k]] == t; ++k)
            (labels[order[k]] == 0 ? c0 : c1) += 1;
        out.push_back({1.0 - t, static_cast<double>(c1) / n1, static_cast<double>(c0) / n0});
    }
    out.back().alpha = 1.0;
    return out;
}

double roc_auc(const std::vector<RocPoint>& roc) {
    double a = 0.0;
    for (std::size_t k = 1; k < roc.size(); ++k)
        a += 0.5 * (roc[k].tpr + roc[k - 1].tpr) * (roc[k].fpr - roc[k - 1].fpr);
    return a;
}

double median(std::vector<double> x) {
    if (x.empty())
        throw std::invalid_argument("median of an empty set");
    const std::size_t m = x.size() / 2;
    std::nth_element(x.begin(), x.begin() + m, x.end());
    if (x.size() % 2)
        return x[m];
    const double hi = x[m];
    return 0.5 * (hi + *std::max_element(x.begin(), x.begin() + m));
}

}  // namespace ncvine
