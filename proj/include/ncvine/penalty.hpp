#pragma once

#include "ncvine/basis.hpp"

#include <Eigen/Dense>

#include <memory>

namespace ncvine {

/// Eigen-system of the unit-lambda penalty restricted to its positive
/// eigenvalues (the (U, Lambda) pair used by the REML update).
struct PenaltyEigen {
    Eigen::MatrixXd vectors;  // m x h
    Eigen::VectorXd values;   // h, all > 0
    int null_dim = 0;
};

/// lambda * (unit penalty) on a sparse basis. The unit matrix and its
/// eigen-system are shared and immutable.
struct PenaltyMatrix {
    std::shared_ptr<const Eigen::MatrixXd> unit;
    std::shared_ptr<const PenaltyEigen> eigen;
    double lambda = 1.0;
    SparseBasisSpec spec;
    int order = 1;

    Eigen::MatrixXd matrix() const { return lambda * (*unit); }
    PenaltyMatrix with_lambda(double l) const {
        PenaltyMatrix p = *this;
        p.lambda = l;
        return p;
    }
};

/// (K-r) x K matrix of r-th order differences.
Eigen::MatrixXd difference_matrix(int K, int r);

/// Univariate penalty V L^T L V on tau(d), V = diag(1/w): differences of
/// the density's knot values b_k / w_k.
Eigen::MatrixXd univariate_penalty(int d, int r);

/// Sum over directions of the hierarchical penalty blocks, restricted to
/// the sparse index set, scaled by lambda. Cached per (d, D, q, r).
PenaltyMatrix assemble_penalty(const SparseBasisSpec& spec, int r, double lambda);

}  // namespace ncvine
