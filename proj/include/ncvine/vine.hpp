#pragma once

#include "ncvine/condreduce.hpp"
#include "ncvine/fit.hpp"
#include "ncvine/satest.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ncvine {

enum class Estimator { SimpA, Cond, Test };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

/// Edge of a regular vine: copula of (a, b) given the variables in `cond`.
/// `left` and `right` are the joined nodes: variables in the first tree,
/// edge indices of the previous tree otherwise.
struct VineEdge {
    int a = 0;
    int b = 0;
    std::vector<int> cond;
    int left = 0;
    int right = 0;

    friend bool operator==(const VineEdge&, const VineEdge&) = default;
};

struct VineStructure {
    int p = 0;
    std::vector<std::vector<VineEdge>> trees;

    /// Edge counts, spanning property and the proximity condition.
    bool is_valid() const;
    friend bool operator==(const VineStructure&, const VineStructure&) = default;
};

struct VineConfig {
    SparseBasisSpec spec2{2, 4, 2};
    SparseBasisSpec spec3{2, 6, 3};
    FitConfig fit;
    double alpha = 0.05;
    int sa_groups = 2;
    /// Worker threads for the candidate fits of one tree.
    int threads = 1;

    void validate() const;
};

struct EdgeFit {
    /// Unconditional fit; also the edge's weight during structure selection.
    CopulaFit partial;
    std::optional<CopulaFit> conditional;
    /// Present whenever the conditioning set is nonempty and the sample
    /// is large enough for the group count.
    std::optional<SaTestResult> test;
    /// Present exactly when a conditional fit is stored.
    std::optional<ConditioningReduction> reduction;

    bool is_conditional() const { return conditional.has_value(); }
    const CopulaFit& active() const { return conditional ? *conditional : partial; }
};

struct FittedVine {
    VineStructure structure;
    Estimator mode = Estimator::SimpA;
    VineConfig config;
    int n = 0;
    std::vector<std::vector<EdgeFit>> edges;  // parallel to structure.trees

    /// In-sample log-likelihood: sum of the active edge log-likelihoods.
    double loglik() const;
};

/// Structure by cAIC minimum spanning trees of unconditional candidate fits.
VineStructure select_structure(const Eigen::MatrixXd& U, const VineConfig& config = {});

/// Sequential fit on an n x p matrix of pseudo-observations in [0,1].
FittedVine fit_vine(const Eigen::MatrixXd& U, Estimator mode, const VineConfig& config = {});

double vine_log_density(const FittedVine& fv, std::span<const double> u);
/// Log-densities at the rows of `points`; each pair density is floored at 1e-300.
Eigen::VectorXd vine_log_density(const FittedVine& fv, const Eigen::MatrixXd& points);

/// Simplest estimator that produces the vine's edge flags: SimpA when no
/// edge is conditional, Test when the flags follow the stored test
/// decisions, Cond otherwise.
Estimator implied_estimator(const FittedVine& fv);

/// Self-describing JSON document; doubles round-trip exactly. The
/// estimator is not part of the document (a Test fit without rejections
/// is the SimpA model); a loaded vine carries `implied_estimator`.
std::string to_json(const FittedVine& fv);
FittedVine fitted_vine_from_json(const std::string& text);

}  // namespace ncvine
