#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

namespace ncvine {

/// Equidistant knots k * 2^-level, k = 0..2^level.
struct KnotTuple {
    int level = 0;
    std::vector<double> knots;
};

/// Degree d of the univariate hierarchical basis, maximum cumulated
/// hierarchy level D, and arity q (2 = unconditional pair copula,
/// 3 = pair copula with one conditioning argument).
struct SparseBasisSpec {
    int d = 2;
    int D = 4;
    int q = 2;

    void validate() const;
    /// Number of univariate basis functions, 2^d + 1.
    int univariate_size() const { return (1 << d) + 1; }
    /// True when D = q*d, i.e. nothing is cut away.
    bool is_full() const { return D == q * d; }

    friend bool operator==(const SparseBasisSpec&, const SparseBasisSpec&) = default;
};

/// Hierarchy level of each column of the univariate hierarchical basis.
struct HierarchyVector {
    std::vector<int> levels;
};

/// Change of basis: B(u) * matrix = hierarchical basis at u.
struct HierarchicalTransform {
    Eigen::MatrixXd matrix;
};

/// Evaluated (sparse) tensor basis. `column_index` holds the retained
/// positions in the full row-major tensor index.
struct BasisMatrix {
    Eigen::MatrixXd values;
    std::vector<int> column_index;
    SparseBasisSpec spec;
};

/// Retained tensor columns of a sparse basis, with each column's
/// per-dimension univariate indices. Cached per spec; immutable.
struct SparseIndex {
    SparseBasisSpec spec;
    std::vector<int> positions;
    std::vector<std::array<int, 3>> multi;  // unused trailing entries are 0

    int size() const { return static_cast<int>(positions.size()); }
};

KnotTuple knot_grid(int level);

/// n x K matrix of linear B-splines on tau(d), each normalized to integrate to one.
Eigen::MatrixXd density_basis(std::span<const double> u, int d);

/// Integrals of the regular (unnormalized) hats on tau(d).
Eigen::VectorXd density_weights(int d);

/// n x K matrix of the univariate hierarchical density basis
/// (columns ordered level 0, level 1, ..., level d).
Eigen::MatrixXd hierarchical_basis(std::span<const double> u, int d);

/// Writes the K hierarchical basis values at a single point into `out`.
void hierarchical_basis_row(double u, int d, std::span<double> out);

std::pair<HierarchicalTransform, HierarchyVector> hierarchical_transform(int d);

/// Cumulated hierarchy levels of the q-fold tensor product, row-major.
std::vector<int> cumulated_hierarchy(const HierarchyVector& e, int q);

/// Index bookkeeping for a spec (shared, thread-safe cache).
const SparseIndex& sparse_index(const SparseBasisSpec& spec);

/// Number of coefficients of the sparse basis.
int sparse_basis_size(const SparseBasisSpec& spec);

/// Evaluates the sparse tensor basis. `columns` holds q vectors of equal length.
BasisMatrix sparse_tensor_basis(std::span<const std::span<const double>> columns,
                                const SparseBasisSpec& spec);

/// Convenience overload taking an n x q matrix.
BasisMatrix sparse_tensor_basis(const Eigen::MatrixXd& points, const SparseBasisSpec& spec);

}  // namespace ncvine
