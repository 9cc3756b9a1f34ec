#include "ncvine/dgp.hpp"

#include "ncvine/rng.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ncvine {

namespace {

constexpr double kIndepTheta = 1e-8;

double debye1(double x) {
    // (1/x) int_0^x t / (e^t - 1) dt for x > 0
    auto f = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
    return GK::integrate(f, 0.0, x, 15, 1e-12) / x;
}

double clamp01(double x) {
    return std::clamp(x, 0.0, 1.0);
}

// D-vine edge (i, k), 0-based, conditioned on x[i+1..k-1]
double edge_theta(const FrankVineSpec& spec, const std::vector<double>& x, int i, int k) {
    const std::span<const double> cond(x.data() + i + 1, static_cast<std::size_t>(k - i - 1));
    return frank_tau_to_theta(tau_schedule(spec, k - i, cond));
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double log_normal_pdf(double z) {
    return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
}

double log_mvn(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& S) {
    const Eigen::LLT<Eigen::MatrixXd> llt(S);
    const Eigen::VectorXd z = llt.matrixL().solve(x - mu);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet +
                   z.squaredNorm());
}

double logsumexp(double a, double b) {
    const double m = std::max(a, b);
    if (m == -std::numeric_limits<double>::infinity())
        return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

std::string fmt(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace

double frank_theta_to_tau(double theta) {
    const double a = std::abs(theta);
    if (a < kIndepTheta)
        return 0.0;
    double tau;
    if (a < 1e-3)
        tau = a / 9.0 - a * a * a / 900.0;
    else
        tau = 1.0 - 4.0 / a * (1.0 - debye1(a));
    return theta < 0 ? -tau : tau;
}

double frank_tau_to_theta(double tau) {
    if (!(std::abs(tau) < 1.0))
        throw std::domain_error("Frank: |tau| must be below 1");
    const double t = std::abs(tau);
    if (t < 1e-12)
        return 0.0;
    double lo = 0.0, hi = 1.0;
    while (frank_theta_to_tau(hi) < t)
        hi *= 2.0;
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        (frank_theta_to_tau(mid) < t ? lo : hi) = mid;
    }
    const double th = 0.5 * (lo + hi);
    return tau < 0 ? -th : th;
}

double frank_log_density(double u, double v, double theta) {
    if (std::abs(theta) < kIndepTheta)
        return 0.0;
    const double em = std::expm1(-theta);
    const double den = em + std::expm1(-theta * u) * std::expm1(-theta * v);
    return std::log(-theta * em) - theta * (u + v) - 2.0 * std::log(std::abs(den));
}

double frank_density(double u, double v, double theta) {
    return std::exp(frank_log_density(u, v, theta));
}

double frank_h(double u, double v, double theta) {
    if (std::abs(theta) < kIndepTheta)
        return clamp01(u);
    const double a = std::expm1(-theta * u);
    const double b = std::expm1(-theta * v);
    return clamp01(std::exp(-theta * v) * a / (std::expm1(-theta) + a * b));
}

double frank_h_inverse(double p, double v, double theta) {
    if (std::abs(theta) < kIndepTheta)
        return clamp01(p);
    const double ev = std::exp(-theta * v);
    const double A = p * std::expm1(-theta) / (ev * (1.0 - p) + p);
    return clamp01(-std::log1p(A) / theta);
}

void FrankVineSpec::validate() const {
    if (p < 2)
        throw std::invalid_argument("Frank vine: dimension must be at least 2");
    if (!(std::abs(tree1_tau) < 1.0))
        throw std::invalid_argument("Frank vine: |tree-1 tau| must be below 1");
    if (tau_case == TauCase::Constant) {
        if (!(std::abs(beta) < 1.0))
            throw std::invalid_argument("Frank vine: |beta| must be below 1");
    } else if (!(beta > 0.0 && beta < 1.0)) {
        throw std::invalid_argument("Frank vine: beta must lie in (0,1)");
    }
}

double tau_schedule(const FrankVineSpec& spec, int tree, std::span<const double> cond) {
    if (tree <= 1)
        return spec.tree1_tau;
    if (cond.empty())
        throw std::invalid_argument("tau_schedule: conditional edge needs conditioning values");
    double m = 0.0;
    for (double c : cond)
        m += c;
    m /= static_cast<double>(cond.size());
    switch (spec.tau_case) {
    case TauCase::A:
        return 8.0 * spec.beta * (m - 0.5) * (m - 0.5) - spec.beta;
    case TauCase::B:
        return spec.beta - 2.0 * spec.beta * m;
    case TauCase::Constant:
        break;
    }
    return spec.beta;
}

Eigen::MatrixXd simulate_frank_vine(const FrankVineSpec& spec, int n, std::uint64_t seed,
                                    std::uint64_t stream) {
    spec.validate();
    if (n < 1)
        throw std::invalid_argument("simulate: n must be positive");
    const int p = spec.p;
    Philox4x32 rng(seed, stream);
    Eigen::MatrixXd out(n, p);
    // fwd[i][k] = F(x_k | x_i..x_{k-1}), bwd[i][k] = F(x_i | x_{i+1}..x_k)
    std::vector<std::vector<double>> fwd(p, std::vector<double>(p)), bwd = fwd, theta = fwd;
    std::vector<double> x(p);
    for (int r = 0; r < n; ++r) {
        x[0] = rng.uniform();
        fwd[0][0] = bwd[0][0] = x[0];
        for (int k = 1; k < p; ++k) {
            fwd[0][k] = rng.uniform();
            for (int i = 0; i < k; ++i) {
                theta[i][k] = edge_theta(spec, x, i, k);
                fwd[i + 1][k] = frank_h_inverse(fwd[i][k], bwd[i][k - 1], theta[i][k]);
            }
            x[k] = fwd[k][k];
            bwd[k][k] = x[k];
            for (int i = k - 1; i >= 0; --i)
                bwd[i][k] = frank_h(bwd[i][k - 1], fwd[i + 1][k], theta[i][k]);
        }
        for (int j = 0; j < p; ++j)
            out(r, j) = x[j];
    }
    return out;
}

double frank_vine_log_density(const FrankVineSpec& spec, std::span<const double> u) {
    spec.validate();
    const int p = spec.p;
    if (static_cast<int>(u.size()) != p)
        throw std::invalid_argument("Frank vine density: dimension mismatch");
    std::vector<double> x(u.begin(), u.end());
    std::vector<std::vector<double>> fwd(p, std::vector<double>(p)), bwd = fwd;
    double logc = 0.0;
    for (int k = 0; k < p; ++k) {
        fwd[k][k] = bwd[k][k] = x[k];
        for (int i = k - 1; i >= 0; --i) {
            const double th = edge_theta(spec, x, i, k);
            const double a = bwd[i][k - 1], b = fwd[i + 1][k];
            logc += frank_log_density(a, b, th);
            fwd[i][k] = frank_h(b, a, th);
            bwd[i][k] = frank_h(a, b, th);
        }
    }
    return logc;
}

double frank_vine_density(const FrankVineSpec& spec, std::span<const double> u) {
    return std::exp(frank_vine_log_density(spec, u));
}

void NormalMixtureSpec::validate() const {
    const Eigen::Index p = mu1.size();
    if (p < 2 || mu2.size() != p || sigma1.rows() != p || sigma1.cols() != p ||
        sigma2.rows() != p || sigma2.cols() != p)
        throw std::invalid_argument("normal mixture: inconsistent dimensions");
    if (!(weight1 > 0.0 && weight1 < 1.0))
        throw std::invalid_argument("normal mixture: weight must lie in (0,1)");
    for (const auto* S : {&sigma1, &sigma2}) {
        if ((*S - S->transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("normal mixture: covariance not symmetric");
        if (Eigen::LLT<Eigen::MatrixXd>(*S).info() != Eigen::Success)
            throw std::invalid_argument("normal mixture: covariance not positive definite");
    }
}

NormalMixtureSpec NormalMixtureSpec::preset(int p) {
    NormalMixtureSpec s;
    if (p == 3) {
        const Eigen::MatrixXd J = Eigen::MatrixXd::Ones(3, 3);
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
        s.mu1 = Eigen::VectorXd::Ones(3);
        s.sigma1 = -0.4 * J + 1.4 * I;
        s.mu2 = -Eigen::VectorXd::Ones(3);
        s.sigma2 = 0.4 * J + 0.6 * I;
    } else if (p == 5) {
        const Eigen::MatrixXd J = Eigen::MatrixXd::Ones(5, 5);
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(5, 5);
        s.mu1 = -Eigen::VectorXd::Ones(5);
        s.sigma1 = 0.4 * J + 0.6 * I;
        s.mu2 = Eigen::VectorXd::Ones(5);
        const double vech[] = {1, -0.4, -0.4, -0.2, -0.1, 1, -0.4, -0.2, -0.1, 1, -0.2, -0.1, 1, -0.1, 1};
        s.sigma2.resize(5, 5);
        int k = 0;
        for (int c = 0; c < 5; ++c)
            for (int r = c; r < 5; ++r) {
                s.sigma2(r, c) = vech[k];
                s.sigma2(c, r) = vech[k];
                ++k;
            }
    } else {
        throw std::invalid_argument("normal mixture preset exists for p = 3 and p = 5 only");
    }
    s.validate();
    return s;
}

double mixture_marginal_cdf(const NormalMixtureSpec& spec, int j, double x) {
    const double s1 = std::sqrt(spec.sigma1(j, j)), s2 = std::sqrt(spec.sigma2(j, j));
    return spec.weight1 * normal_cdf((x - spec.mu1[j]) / s1) +
           (1.0 - spec.weight1) * normal_cdf((x - spec.mu2[j]) / s2);
}

double mixture_marginal_quantile(const NormalMixtureSpec& spec, int j, double u) {
    u = std::clamp(u, 1e-15, 1.0 - 1e-15);
    const double s = std::max(std::sqrt(spec.sigma1(j, j)), std::sqrt(spec.sigma2(j, j)));
    double lo = std::min(spec.mu1[j], spec.mu2[j]) - 10.0 * s;
    double hi = std::max(spec.mu1[j], spec.mu2[j]) + 10.0 * s;
    auto f = [&](double x) { return mixture_marginal_cdf(spec, j, x) - u; };
    auto tol = [](double a, double b) { return std::abs(b - a) < 1e-12; };
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
    return 0.5 * (r.first + r.second);
}

double mixture_copula_log_density(const NormalMixtureSpec& spec, std::span<const double> u) {
    const int p = spec.dim();
    if (static_cast<int>(u.size()) != p)
        throw std::invalid_argument("mixture density: dimension mismatch");
    Eigen::VectorXd x(p);
    double log_margins = 0.0;
    for (int j = 0; j < p; ++j) {
        x[j] = mixture_marginal_quantile(spec, j, u[j]);
        const double s1 = std::sqrt(spec.sigma1(j, j)), s2 = std::sqrt(spec.sigma2(j, j));
        log_margins += logsumexp(
            std::log(spec.weight1) + log_normal_pdf((x[j] - spec.mu1[j]) / s1) - std::log(s1),
            std::log(1.0 - spec.weight1) + log_normal_pdf((x[j] - spec.mu2[j]) / s2) - std::log(s2));
    }
    const double joint = logsumexp(std::log(spec.weight1) + log_mvn(x, spec.mu1, spec.sigma1),
                                   std::log(1.0 - spec.weight1) + log_mvn(x, spec.mu2, spec.sigma2));
    return joint - log_margins;
}

MixtureSample simulate_normal_mixture(const NormalMixtureSpec& spec, int n, std::uint64_t seed,
                                      std::uint64_t stream) {
    spec.validate();
    if (n < 1)
        throw std::invalid_argument("simulate: n must be positive");
    const int p = spec.dim();
    const Eigen::MatrixXd L1 = spec.sigma1.llt().matrixL();
    const Eigen::MatrixXd L2 = spec.sigma2.llt().matrixL();
    Philox4x32 rng(seed, stream);
    MixtureSample s{Eigen::MatrixXd(n, p), Eigen::MatrixXd(n, p), Eigen::VectorXi(n)};
    Eigen::VectorXd z(p);
    for (int i = 0; i < n; ++i) {
        const int c = rng.uniform() < spec.weight1 ? 0 : 1;
        for (int j = 0; j < p; ++j)
            z[j] = rng.normal();
        s.raw.row(i) = (c == 0 ? spec.mu1 + L1 * z : spec.mu2 + L2 * z).transpose();
        s.component[i] = c;
        for (int j = 0; j < p; ++j)
            s.copula(i, j) = mixture_marginal_cdf(spec, j, s.raw(i, j));
    }
    return s;
}

Eigen::MatrixXd DgpSpec::simulate(int n, std::uint64_t seed, std::uint64_t stream) const {
    if (kind == Kind::Frank)
        return simulate_frank_vine(frank, n, seed, stream);
    return simulate_normal_mixture(mixture, n, seed, stream).copula;
}

double DgpSpec::log_density(std::span<const double> u) const {
    if (kind == Kind::Frank)
        return frank_vine_log_density(frank, u);
    return mixture_copula_log_density(mixture, u);
}

DgpSpec DgpSpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string family = text.substr(0, colon);
    std::map<std::string, std::string> kv;
    if (colon != std::string::npos) {
        std::stringstream ss(text.substr(colon + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("DGP spec: expected key=value, got '" + item + "'");
            kv[item.substr(0, eq)] = item.substr(eq + 1);
        }
    }
    auto number = [&](const std::string& key, double fallback) {
        const auto it = kv.find(key);
        if (it == kv.end())
            return fallback;
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size())
            throw std::invalid_argument("DGP spec: bad number for " + key);
        kv.erase(it);
        return v;
    };
    DgpSpec d;
    if (family == "frank") {
        d.kind = Kind::Frank;
        d.frank.p = static_cast<int>(number("p", 3));
        d.frank.beta = number("beta", 0.6);
        d.frank.tree1_tau = number("tau1", 0.25);
        const auto it = kv.find("case");
        const std::string c = it == kv.end() ? "b" : it->second;
        if (it != kv.end())
            kv.erase(it);
        if (c == "a")
            d.frank.tau_case = TauCase::A;
        else if (c == "b")
            d.frank.tau_case = TauCase::B;
        else if (c == "const")
            d.frank.tau_case = TauCase::Constant;
        else
            throw std::invalid_argument("DGP spec: case must be a, b or const");
        d.frank.validate();
    } else if (family == "mixture") {
        d.kind = Kind::Mixture;
        d.mixture_p = static_cast<int>(number("p", 3));
        d.mixture = NormalMixtureSpec::preset(d.mixture_p);
    } else {
        throw std::invalid_argument("DGP spec: unknown family '" + family + "'");
    }
    if (!kv.empty())
        throw std::invalid_argument("DGP spec: unknown key '" + kv.begin()->first + "'");
    return d;
}

std::string DgpSpec::to_string() const {
    if (kind == Kind::Mixture)
        return "mixture:p=" + std::to_string(mixture_p);
    const char* c = frank.tau_case == TauCase::A ? "a" : frank.tau_case == TauCase::B ? "b" : "const";
    return "frank:p=" + std::to_string(frank.p) + ",case=" + c + ",beta=" + fmt(frank.beta) +
           ",tau1=" + fmt(frank.tree1_tau);
}

}  // namespace ncvine
