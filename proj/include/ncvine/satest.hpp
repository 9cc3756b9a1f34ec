#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ncvine {

/// Partition of the conditioning variable used by the test.
struct SaGroups {
    int count = 2;
    std::vector<double> cuts;  // upper cond value of each group but the last
    std::vector<int> sizes;
    std::vector<double> tau;       // Kendall's tau per group
    std::vector<double> quadrant;  // P(u <= 1/2, v <= 1/2) per group
};

struct SaTestResult {
    double statistic = 0.0;
    double pvalue = 1.0;
    int df = 0;
    bool reject = false;
    double alpha = 0.05;
    SaGroups groups;
};

/// Test of equal conditional copulas across groups of the conditioning
/// variable. Groups are consecutive blocks of the cond ranks; within each
/// group Kendall's tau and the lower-quadrant probability are estimated with
/// a jackknife covariance, and the between-group contrasts give a Wald
/// statistic with a chi-square reference on 2(G-1) degrees of freedom.
SaTestResult test_simplifying(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                              const Eigen::VectorXd& cond, double alpha = 0.05, int groups = 2);

inline constexpr int kMinGroupSize = 50;

}  // namespace ncvine
