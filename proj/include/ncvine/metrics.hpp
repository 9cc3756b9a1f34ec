#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ncvine {

struct KlResult {
    double value = 0.0;  // mean of log c_true - log c_fit over the used points
    int n_used = 0;
    int n_nonfinite = 0;
};

/// Out-of-sample Kullback-Leibler divergence from paired log-densities.
/// Non-finite pairs raise std::domain_error unless `exclude_nonfinite`.
KlResult kl_oos(const Eigen::VectorXd& log_true, const Eigen::VectorXd& log_fit,
                bool exclude_nonfinite = false);

using LogDensity = std::function<double(std::span<const double>)>;
KlResult kl_oos(const LogDensity& log_true, const LogDensity& log_fit, const Eigen::MatrixXd& points,
                bool exclude_nonfinite = false);

/// Posterior probability of class 0, computed in log space. When both
/// densities vanish the result is 0.5 and `warning` (if given) is set.
double posterior_prob(double logf0, double logf1, double pi0, std::string* warning = nullptr);

struct RocPoint {
    double alpha = 0.0;  // class 0 is assigned when the posterior is at least 1 - alpha
    double fpr = 0.0;    // class-1 observations assigned to class 0
    double tpr = 0.0;    // class-0 observations assigned to class 0
};

/// Threshold sweep from (0,0) to (1,1); labels are 0 or 1.
std::vector<RocPoint> roc_points(const Eigen::VectorXd& posteriors, const Eigen::VectorXi& labels);
double roc_auc(const std::vector<RocPoint>& roc);

double median(std::vector<double> x);

/// Scores of one fitted model on one evaluation sample.
struct EvalReport {
    std::string model_id;
    int replicate = 0;
    int n_eval = 0;
    double mean_loglik = 0.0;
    bool has_kl = false;
    double kl = 0.0;
    int n_nonfinite = 0;
};

}  // namespace ncvine
