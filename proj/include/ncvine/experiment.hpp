#pragma once

#include "ncvine/dgp.hpp"
#include "ncvine/metrics.hpp"
#include "ncvine/vine.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace ncvine {

const char* version();

struct ExperimentConfig {
    std::string dgp;   // DGP spec text, empty when training data comes from a file
    std::string data;  // training CSV
    bool ranks = false;
    std::vector<Estimator> estimators{Estimator::SimpA, Estimator::Cond, Estimator::Test};
    int d = 2;
    int D2 = 4;
    int D3 = 6;
    int n = 500;
    int n_eval = 0;  // 0 means n
    int reps = 1;
    std::uint64_t seed = 1;
    double alpha = 0.05;
    int groups = 2;
    int threads = 1;
    std::string out = "out";

    void validate() const;
    int eval_size() const { return n_eval > 0 ? n_eval : n; }
    VineConfig vine_config() const;
};

/// "all" or a comma-separated subset of SimpA, Cond, Test.
std::vector<Estimator> parse_estimators(const std::string& text);

struct ReplicateSample {
    Eigen::MatrixXd train;
    Eigen::MatrixXd eval;
};

/// Replicate r draws its training sample from stream 2r and its
/// evaluation sample from stream 2r+1 of the seed.
ReplicateSample simulate_replicate(const DgpSpec& dgp, int n, int n_eval, std::uint64_t seed, int rep);

/// Row-wise true log-density of a DGP.
Eigen::VectorXd dgp_log_density(const DgpSpec& dgp, const Eigen::MatrixXd& points);

/// Mean out-of-sample log-likelihood, and KL when `log_true` is nonempty.
EvalReport evaluate_model(const FittedVine& fv, const Eigen::MatrixXd& eval,
                          const Eigen::VectorXd& log_true, const std::string& model_id, int rep);

struct ReplicateResult {
    int replicate = 0;
    std::vector<FittedVine> fits;  // parallel to config.estimators
    std::vector<EvalReport> reports;
};

ReplicateResult run_replicate(const ExperimentConfig& cfg, const DgpSpec& dgp, int rep);
/// All replicates, spread over cfg.threads workers; ordered by replicate.
std::vector<ReplicateResult> run_study(const ExperimentConfig& cfg, const DgpSpec& dgp);

/// replicate,estimator,n_eval,oos_loglik[,kl]
std::string reports_csv(const std::vector<EvalReport>& reports);
/// One row per edge: fit summaries and the test decision.
std::string edge_report_csv(const FittedVine& fv, const std::string& estimator);

}  // namespace ncvine
