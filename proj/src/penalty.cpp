#include "ncvine/penalty.hpp"

#include <array>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace ncvine {

Eigen::MatrixXd difference_matrix(int K, int r) {
    if (r < 1 || r >= K)
        throw std::invalid_argument("difference order must satisfy 1 <= r < K");
    Eigen::MatrixXd L = Eigen::MatrixXd::Identity(K, K);
    for (int step = 0; step < r; ++step) {
        const Eigen::Index rows = L.rows() - 1;
        Eigen::MatrixXd next(rows, K);
        for (Eigen::Index i = 0; i < rows; ++i)
            next.row(i) = L.row(i) - L.row(i + 1);
        L = std::move(next);
    }
    return L;
}

Eigen::MatrixXd univariate_penalty(int d, int r) {
    // differences of the knot values b_k / w_k of the density
    const Eigen::VectorXd w = density_weights(d).cwiseInverse();
    const Eigen::MatrixXd LW = difference_matrix(static_cast<int>(w.size()), r) * w.asDiagonal();
    return LW.transpose() * LW;
}

namespace {

struct CachedPenalty {
    std::shared_ptr<const Eigen::MatrixXd> unit;
    std::shared_ptr<const PenaltyEigen> eigen;
};

CachedPenalty build(const SparseBasisSpec& spec, int r) {
    const auto& idx = sparse_index(spec);
    const auto [A, e] = hierarchical_transform(spec.d);
    const Eigen::VectorXd w = density_weights(spec.d).cwiseInverse();
    const Eigen::MatrixXd WA = w.asDiagonal() * A.matrix;
    const Eigen::MatrixXd ident = WA.transpose() * WA;
    const Eigen::MatrixXd pen = A.matrix.transpose() * univariate_penalty(spec.d, r) * A.matrix;

    const int m = idx.size();
    auto unit = std::make_shared<Eigen::MatrixXd>(m, m);
    for (int a = 0; a < m; ++a) {
        for (int b = a; b < m; ++b) {
            const auto& ka = idx.multi[a];
            const auto& kb = idx.multi[b];
            double sum = 0.0;
            for (int j = 0; j < spec.q; ++j) {
                double term = pen(ka[j], kb[j]);
                for (int i = 0; i < spec.q; ++i)
                    if (i != j)
                        term *= ident(ka[i], kb[i]);
                sum += term;
            }
            (*unit)(a, b) = sum;
            (*unit)(b, a) = sum;
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*unit);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    auto eig = std::make_shared<PenaltyEigen>();
    std::vector<int> keep;
    for (int i = 0; i < m; ++i)
        if (ev[i] > tol)
            keep.push_back(i);
    eig->vectors.resize(m, static_cast<Eigen::Index>(keep.size()));
    eig->values.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        eig->vectors.col(c) = es.eigenvectors().col(keep[c]);
        eig->values[c] = ev[keep[c]];
    }
    eig->null_dim = m - static_cast<int>(keep.size());
    return {std::move(unit), std::move(eig)};
}

}  // namespace

PenaltyMatrix assemble_penalty(const SparseBasisSpec& spec, int r, double lambda) {
    spec.validate();
    if (!(lambda >= 0.0))
        throw std::invalid_argument("penalty lambda must be nonnegative");
    static std::mutex mutex;
    static std::map<std::array<int, 4>, CachedPenalty> cache;
    const std::array<int, 4> key{spec.d, spec.D, spec.q, r};
    CachedPenalty entry;
    {
        std::lock_guard lock(mutex);
        auto it = cache.find(key);
        if (it == cache.end())
            it = cache.emplace(key, build(spec, r)).first;
        entry = it->second;
    }
    return PenaltyMatrix{entry.unit, entry.eigen, lambda, spec, r};
}

}  // namespace ncvine
