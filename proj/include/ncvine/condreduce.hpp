#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ncvine {

/// Ranks divided by n+1, ties averaged.
Eigen::VectorXd standardized_ranks(const Eigen::VectorXd& x);

/// First principal component of a conditioning set, reduced to ranks.
struct ConditioningReduction {
    Eigen::VectorXd loading;  // unit length; largest-magnitude entry positive
    Eigen::VectorXd means;    // column means removed before projection
    Eigen::VectorXd scores;
    Eigen::VectorXd reduced;  // standardized ranks of `scores`
    /// Training rank map: distinct sorted scores and their averaged ranks.
    std::vector<double> map_scores;
    std::vector<double> map_ranks;

    int columns() const { return static_cast<int>(loading.size()); }
    /// Conditioning values for new rows: projection on the loading, then
    /// linear interpolation of the training rank map (clamped at its ends).
    /// A single conditioning column passes through unchanged.
    Eigen::VectorXd project(const Eigen::MatrixXd& cond) const;
};

/// `U` is n x k (k >= 1). For k = 1 the reduced vector is the column itself.
ConditioningReduction reduce_conditioners(const Eigen::MatrixXd& U);

}  // namespace ncvine
