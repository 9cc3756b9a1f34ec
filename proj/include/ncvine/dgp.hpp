#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>

namespace ncvine {

// Frank copula family. |theta| < 1e-8 is treated as independence.
double frank_theta_to_tau(double theta);
double frank_tau_to_theta(double tau);
double frank_density(double u, double v, double theta);
double frank_log_density(double u, double v, double theta);
/// Conditional cdf of u given v.
double frank_h(double u, double v, double theta);
double frank_h_inverse(double p, double v, double theta);

/// Kendall's tau path of the conditional edges. `Constant` holds tau at
/// beta for every edge above the first tree (a simplified vine).
enum class TauCase { A, B, Constant };

struct FrankVineSpec {
    int p = 3;
    TauCase tau_case = TauCase::B;
    double beta = 0.6;
    double tree1_tau = 0.25;

    void validate() const;
};

/// Tau of a D-vine edge in tree `tree` (1-based) given the conditioning values.
double tau_schedule(const FrankVineSpec& spec, int tree, std::span<const double> cond);

/// Inverse-Rosenblatt sampling of the D-vine 1-2-...-p. Reproducible in (n, seed).
Eigen::MatrixXd simulate_frank_vine(const FrankVineSpec& spec, int n, std::uint64_t seed,
                                    std::uint64_t stream = 0);

double frank_vine_log_density(const FrankVineSpec& spec, std::span<const double> u);
double frank_vine_density(const FrankVineSpec& spec, std::span<const double> u);

struct NormalMixtureSpec {
    Eigen::VectorXd mu1, mu2;
    Eigen::MatrixXd sigma1, sigma2;
    double weight1 = 0.5;

    int dim() const { return static_cast<int>(mu1.size()); }
    void validate() const;

    /// The three- and five-dimensional mixtures of the simulation study.
    static NormalMixtureSpec preset(int p);
};

struct MixtureSample {
    Eigen::MatrixXd raw;
    Eigen::MatrixXd copula;  // marginal cdfs applied
    Eigen::VectorXi component;
};

MixtureSample simulate_normal_mixture(const NormalMixtureSpec& spec, int n, std::uint64_t seed,
                                      std::uint64_t stream = 0);

double mixture_marginal_cdf(const NormalMixtureSpec& spec, int j, double x);
double mixture_marginal_quantile(const NormalMixtureSpec& spec, int j, double u);
double mixture_copula_log_density(const NormalMixtureSpec& spec, std::span<const double> u);

/// A data generating process: either a Frank D-vine or a normal mixture.
struct DgpSpec {
    enum class Kind { Frank, Mixture } kind = Kind::Frank;
    FrankVineSpec frank;
    NormalMixtureSpec mixture;
    int mixture_p = 3;

    int dim() const { return kind == Kind::Frank ? frank.p : mixture.dim(); }
    /// Samples on the copula scale.
    Eigen::MatrixXd simulate(int n, std::uint64_t seed, std::uint64_t stream = 0) const;
    double log_density(std::span<const double> u) const;

    /// "frank:p=3,case=b,beta=0.6[,tau1=0.25]" or "mixture:p=3".
    static DgpSpec parse(const std::string& text);
    std::string to_string() const;
};

}  // namespace ncvine
