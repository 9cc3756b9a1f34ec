#include "ncvine/condreduce.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ncvine {

Eigen::VectorXd standardized_ranks(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n;) {
        Eigen::Index j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]])
            ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k)
            r[order[k]] = avg / static_cast<double>(n + 1);
        i = j + 1;
    }
    return r;
}

ConditioningReduction reduce_conditioners(const Eigen::MatrixXd& U) {
    if (U.cols() < 1 || U.rows() < 2)
        throw std::invalid_argument("reduce_conditioners: need at least one column and two rows");
    ConditioningReduction out;
    if (U.cols() == 1) {
        out.loading = Eigen::VectorXd::Ones(1);
        out.means = Eigen::VectorXd::Zero(1);
        out.scores = U.col(0);
        out.reduced = U.col(0);
        return out;
    }
    out.means = U.colwise().mean().transpose();
    const Eigen::MatrixXd C = U.rowwise() - out.means.transpose();
    const Eigen::MatrixXd cov = C.transpose() * C / static_cast<double>(U.rows() - 1);
    if (!(cov.diagonal().maxCoeff() > 0.0))
        throw std::domain_error("reduce_conditioners: conditioning columns have zero variance");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Eigen::VectorXd a = es.eigenvectors().col(cov.cols() - 1);
    Eigen::Index imax = 0;
    a.cwiseAbs().maxCoeff(&imax);
    if (a[imax] < 0.0)
        a = -a;
    out.loading = a;
    out.scores = C * a;
    out.reduced = standardized_ranks(out.scores);

    std::vector<Eigen::Index> order(out.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return out.scores[i] < out.scores[j]; });
    for (auto i : order) {
        if (!out.map_scores.empty() && out.map_scores.back() == out.scores[i])
            continue;
        out.map_scores.push_back(out.scores[i]);
        out.map_ranks.push_back(out.reduced[i]);
    }
    return out;
}

Eigen::VectorXd ConditioningReduction::project(const Eigen::MatrixXd& cond) const {
    if (cond.cols() != loading.size())
        throw std::invalid_argument("project: conditioning column count mismatch");
    if (loading.size() == 1)
        return cond.col(0).cwiseMax(0.0).cwiseMin(1.0);
    const Eigen::VectorXd s = (cond.rowwise() - means.transpose()) * loading;
    Eigen::VectorXd out(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double x = s[i];
        if (x <= map_scores.front()) {
            out[i] = map_ranks.front();
            continue;
        }
        if (x >= map_scores.back()) {
            out[i] = map_ranks.back();
            continue;
        }
        const auto it = std::upper_bound(map_scores.begin(), map_scores.end(), x);
        const std::size_t k = static_cast<std::size_t>(it - map_scores.begin());
        const double t = (x - map_scores[k - 1]) / (map_scores[k] - map_scores[k - 1]);
        out[i] = map_ranks[k - 1] + t * (map_ranks[k] - map_ranks[k - 1]);
    }
    return out;
}

}  // namespace ncvine
