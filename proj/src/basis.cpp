#include "ncvine/basis.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace ncvine {

namespace {

struct HatColumn {
    double center;
    double width;     // knot spacing of the level the hat lives on
    double integral;  // width for interior hats, width/2 at the boundary
};

double hat(double u, const HatColumn& c) {
    const double t = 1.0 - std::abs(u - c.center) / c.width;
    return t > 0.0 ? t / c.integral : 0.0;
}

void check_unit(double u) {
    if (!(u >= 0.0 && u <= 1.0))
        throw std::domain_error("basis argument outside [0,1]: " + std::to_string(u));
}

std::vector<HatColumn> regular_columns(int d) {
    const int K = (1 << d) + 1;
    const double h = std::ldexp(1.0, -d);
    std::vector<HatColumn> cols(K);
    for (int k = 0; k < K; ++k) {
        const bool boundary = (k == 0 || k == K - 1);
        cols[k] = {k * h, h, boundary ? 0.5 * h : h};
    }
    return cols;
}

// Level 0 contributes both hats of tau(0); level l >= 1 contributes the
// hats at the odd knots of tau(l), which are the knots new at that level.
std::vector<HatColumn> hierarchical_columns(int d) {
    std::vector<HatColumn> cols{{0.0, 1.0, 0.5}, {1.0, 1.0, 0.5}};
    for (int l = 1; l <= d; ++l) {
        const double h = std::ldexp(1.0, -l);
        for (int j = 1; j <= (1 << (l - 1)); ++j)
            cols.push_back({(2 * j - 1) * h, h, h});
    }
    return cols;
}

}  // namespace

void SparseBasisSpec::validate() const {
    if (q != 2 && q != 3)
        throw std::invalid_argument("basis arity must be 2 or 3, got " + std::to_string(q));
    if (d < 1)
        throw std::invalid_argument("basis degree must be >= 1");
    if (d > 6)
        throw std::invalid_argument("basis degree above 6 is not supported");
    if (D < d || D > q * d)
        throw std::invalid_argument("cumulated level D must satisfy d <= D <= q*d (d=" +
                                    std::to_string(d) + ", D=" + std::to_string(D) +
                                    ", q=" + std::to_string(q) + ")");
}

KnotTuple knot_grid(int level) {
    if (level < 0)
        throw std::invalid_argument("knot level must be nonnegative");
    KnotTuple t{level, {}};
    const int count = (1 << level) + 1;
    t.knots.resize(count);
    for (int k = 0; k < count; ++k)
        t.knots[k] = std::ldexp(static_cast<double>(k), -level);
    return t;
}

Eigen::MatrixXd density_basis(std::span<const double> u, int d) {
    if (d < 0)
        throw std::invalid_argument("knot level must be nonnegative");
    const auto cols = regular_columns(d);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(u.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < u.size(); ++i) {
        check_unit(u[i]);
        for (std::size_t k = 0; k < cols.size(); ++k)
            out(i, k) = hat(u[i], cols[k]);
    }
    return out;
}

Eigen::VectorXd density_weights(int d) {
    const auto cols = regular_columns(d);
    Eigen::VectorXd w(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k)
        w[k] = cols[k].integral;
    return w;
}

void hierarchical_basis_row(double u, int d, std::span<double> out) {
    check_unit(u);
    // Only one or two hats per level are nonzero; evaluate them directly.
    out[0] = 2.0 * (1.0 - u);
    out[1] = 2.0 * u;
    std::size_t offset = 2;
    for (int l = 1; l <= d; ++l) {
        const int count = 1 << (l - 1);
        const double scale = static_cast<double>(1 << l);
        for (int j = 0; j < count; ++j)
            out[offset + j] = 0.0;
        // hat j (0-based) is centred at (2j+1)/2^l with half-width 1/2^l
        const double x = u * scale;  // in [0, 2^l]
        int j = static_cast<int>(std::floor(x * 0.5));
        for (int jj = j - 1; jj <= j + 1; ++jj) {
            if (jj < 0 || jj >= count)
                continue;
            const double t = 1.0 - std::abs(x - (2 * jj + 1));
            if (t > 0.0)
                out[offset + jj] = t * scale;
        }
        offset += count;
    }
}

Eigen::MatrixXd hierarchical_basis(std::span<const double> u, int d) {
    const int K = (1 << d) + 1;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(
        static_cast<Eigen::Index>(u.size()), K);
    for (std::size_t i = 0; i < u.size(); ++i)
        hierarchical_basis_row(u[i], d, std::span<double>(out.row(i).data(), K));
    return out;
}

std::pair<HierarchicalTransform, HierarchyVector> hierarchical_transform(int d) {
    if (d < 1)
        throw std::invalid_argument("hierarchical basis needs degree >= 1");
    const auto fine = regular_columns(d);
    const auto hier = hierarchical_columns(d);
    const int K = static_cast<int>(fine.size());

    // A hierarchical hat is piecewise linear on tau(d), so it equals its
    // nodal interpolant sum_k f(t_k) * w_k * phi_k.
    HierarchicalTransform A{Eigen::MatrixXd(K, K)};
    for (int k = 0; k < K; ++k)
        for (int c = 0; c < K; ++c)
            A.matrix(k, c) = fine[k].integral * hat(fine[k].center, hier[c]);

    HierarchyVector e;
    e.levels.resize(K);
    for (int k = 1; k <= K; ++k) {
        int l = 0;
        while (k > (1 << l) + 1)
            ++l;
        e.levels[k - 1] = l;
    }
    return {std::move(A), std::move(e)};
}

std::vector<int> cumulated_hierarchy(const HierarchyVector& e, int q) {
    if (q != 2 && q != 3)
        throw std::invalid_argument("arity must be 2 or 3");
    // (a (+) b)_l = a_ceil(l/|b|) + b_rest : row-major sum of levels.
    std::vector<int> acc = e.levels;
    for (int r = 1; r < q; ++r) {
        std::vector<int> next;
        next.reserve(acc.size() * e.levels.size());
        for (int a : acc)
            for (int b : e.levels)
                next.push_back(a + b);
        acc = std::move(next);
    }
    return acc;
}

const SparseIndex& sparse_index(const SparseBasisSpec& spec) {
    spec.validate();
    static std::mutex mutex;
    static std::map<std::array<int, 3>, std::unique_ptr<SparseIndex>> cache;
    const std::array<int, 3> key{spec.d, spec.D, spec.q};
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end())
        return *it->second;

    auto idx = std::make_unique<SparseIndex>();
    idx->spec = spec;
    const auto [A, e] = hierarchical_transform(spec.d);
    const auto eps = cumulated_hierarchy(e, spec.q);
    const int K = spec.univariate_size();
    for (int pos = 0; pos < static_cast<int>(eps.size()); ++pos) {
        if (eps[pos] > spec.D)
            continue;
        std::array<int, 3> mi{0, 0, 0};
        int rest = pos;
        for (int j = spec.q - 1; j >= 0; --j) {
            mi[j] = rest % K;
            rest /= K;
        }
        idx->positions.push_back(pos);
        idx->multi.push_back(mi);
    }
    auto& ref = *idx;
    cache.emplace(key, std::move(idx));
    return ref;
}

int sparse_basis_size(const SparseBasisSpec& spec) {
    return sparse_index(spec).size();
}

BasisMatrix sparse_tensor_basis(std::span<const std::span<const double>> columns,
                                const SparseBasisSpec& spec) {
    const auto& idx = sparse_index(spec);
    if (static_cast<int>(columns.size()) != spec.q)
        throw std::invalid_argument("expected " + std::to_string(spec.q) + " input vectors");
    const std::size_t n = columns[0].size();
    for (const auto& c : columns)
        if (c.size() != n)
            throw std::invalid_argument("input vectors differ in length");

    std::vector<Eigen::MatrixXd> uni;
    for (const auto& c : columns)
        uni.push_back(hierarchical_basis(c, spec.d));

    BasisMatrix out{Eigen::MatrixXd(static_cast<Eigen::Index>(n), idx.size()), idx.positions, spec};
    for (int c = 0; c < idx.size(); ++c) {
        const auto& mi = idx.multi[c];
        auto col = out.values.col(c);
        col = uni[0].col(mi[0]);
        for (int j = 1; j < spec.q; ++j)
            col.array() *= uni[j].col(mi[j]).array();
    }
    return out;
}

BasisMatrix sparse_tensor_basis(const Eigen::MatrixXd& points, const SparseBasisSpec& spec) {
    std::vector<std::vector<double>> cols(points.cols());
    std::vector<std::span<const double>> views;
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        cols[j].assign(points.col(j).data(), points.col(j).data() + points.rows());
        views.emplace_back(cols[j]);
    }
    return sparse_tensor_basis(std::span<const std::span<const double>>(views), spec);
}

}  // namespace ncvine
