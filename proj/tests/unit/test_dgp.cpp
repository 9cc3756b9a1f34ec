#include <doctest.h>

#include "ncvine/dgp.hpp"
#include "oracles.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <random>
#include <vector>

using namespace ncvine;

namespace {

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = (x[i] - x[j]) * (y[i] - y[j]);
            s += a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
        }
    return 2.0 * s / (static_cast<double>(n) * (n - 1));
}

std::vector<double> col(const Eigen::MatrixXd& m, int j) {
    return {m.col(j).data(), m.col(j).data() + m.rows()};
}

// Kolmogorov-Smirnov distance to the uniform distribution
double ks_uniform(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        d = std::max({d, (i + 1) / n - x[i], x[i] - i / n});
    return d;
}

double ks_crit_1pct(std::size_t n) {
    return 1.628 / std::sqrt(static_cast<double>(n));
}

double oracle_h(double u, double v, double th) {
    const double a = std::expm1(-th * u), b = std::expm1(-th * v);
    return std::exp(-th * v) * a / (std::expm1(-th) + a * b);
}

double gaussian_copula_density(const Eigen::MatrixXd& R, const std::vector<double>& u) {
    const boost::math::normal N;
    const Eigen::Index p = R.rows();
    Eigen::VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j)
        z[j] = boost::math::quantile(N, u[j]);
    const Eigen::MatrixXd Q = R.inverse() - Eigen::MatrixXd::Identity(p, p);
    return std::exp(-0.5 * z.dot(Q * z)) / std::sqrt(R.determinant());
}

}  // namespace

TEST_CASE("Frank tau and theta") {
    CHECK(frank_tau_to_theta(0.0) == 0.0);
    const double th = frank_tau_to_theta(0.25);
    CHECK(th == doctest::Approx(2.372).epsilon(5e-4));
    CHECK(th == doctest::Approx(oracle::frank_theta(0.25)).epsilon(1e-8));
    for (double tau : {0.05, 0.2, 0.4, 0.6, 0.9}) {
        CHECK(frank_tau_to_theta(-tau) == -frank_tau_to_theta(tau));
        CHECK(frank_theta_to_tau(frank_tau_to_theta(tau)) == doctest::Approx(tau).epsilon(1e-9));
        CHECK(frank_theta_to_tau(oracle::frank_theta(tau)) == doctest::Approx(tau).epsilon(1e-9));
    }
    // series branch joins the quadrature branch smoothly
    CHECK(frank_theta_to_tau(1e-3 - 1e-12) == doctest::Approx(frank_theta_to_tau(1e-3 + 1e-12)).epsilon(1e-9));
    CHECK_THROWS_AS(frank_tau_to_theta(1.0), std::domain_error);
}

TEST_CASE("Frank closed forms") {
    for (double u : {0.1, 0.5, 0.93})
        for (double v : {0.2, 0.7}) {
            CHECK(frank_density(u, v, 0.0) == 1.0);
            CHECK(frank_h(u, v, 1e-9) == doctest::Approx(u));
            for (double th : {-5.7, 2.372, 12.0}) {
                CHECK(frank_density(u, v, th) == doctest::Approx(oracle::frank_density(u, v, th)).epsilon(1e-12));
                CHECK(frank_h(u, v, th) == doctest::Approx(oracle_h(u, v, th)).epsilon(1e-12));
            }
        }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const double u = unif(rng), v = unif(rng), th = 20.0 * (unif(rng) - 0.5);
        worst = std::max(worst, std::abs(frank_h_inverse(frank_h(u, v, th), v, th) - u));
    }
    CHECK(worst < 1e-10);
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    for (double v : {0.1, 0.5, 0.9}) {
        const double m = GK::integrate([&](double u) { return frank_density(u, v, 2.372); }, 0.0, 1.0, 10, 1e-13);
        CHECK(m == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("tau schedule") {
    FrankVineSpec a{3, TauCase::A, 0.2};
    const std::vector<double> half{0.5}, zero{0.0}, one{1.0};
    CHECK(tau_schedule(a, 2, half) == doctest::Approx(-0.2));
    CHECK(tau_schedule(a, 2, zero) == doctest::Approx(0.2));
    FrankVineSpec b{3, TauCase::B, 0.6};
    CHECK(tau_schedule(b, 2, one) == doctest::Approx(-0.6));
    CHECK(tau_schedule(b, 1, one) == 0.25);
    const std::vector<double> pair{0.2, 0.6};
    CHECK(tau_schedule(b, 3, pair) == doctest::Approx(0.6 - 1.2 * 0.4));
    CHECK_THROWS_AS(FrankVineSpec({3, TauCase::B, 1.2}).validate(), std::invalid_argument);
}

TEST_CASE("Frank vine sampling") {
    const FrankVineSpec spec{3, TauCase::B, 0.6};
    const Eigen::MatrixXd x = simulate_frank_vine(spec, 5000, 11);
    for (int j = 0; j < 3; ++j)
        CHECK(ks_uniform(col(x, j)) < ks_crit_1pct(5000));
    const Eigen::MatrixXd y = simulate_frank_vine(spec, 2000, 12);
    CHECK(kendall_tau(col(y, 0), col(y, 1)) == doctest::Approx(0.25).epsilon(0.2));
    CHECK(kendall_tau(col(y, 1), col(y, 2)) == doctest::Approx(0.25).epsilon(0.2));

    const FrankVineSpec five{5, TauCase::A, 0.4};
    const Eigen::MatrixXd z = simulate_frank_vine(five, 5000, 13);
    for (int j = 0; j < 5; ++j)
        CHECK(ks_uniform(col(z, j)) < ks_crit_1pct(5000));
}

TEST_CASE("conditional dependence flips sign in case b") {
    const FrankVineSpec spec{3, TauCase::B, 0.4};
    const Eigen::MatrixXd x = simulate_frank_vine(spec, 2000, 21);
    const double th = oracle::frank_theta(0.25);
    std::vector<double> lo1, lo3, hi1, hi3;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double a = oracle_h(x(i, 0), x(i, 1), th), b = oracle_h(x(i, 2), x(i, 1), th);
        (x(i, 1) < 0.5 ? lo1 : hi1).push_back(a);
        (x(i, 1) < 0.5 ? lo3 : hi3).push_back(b);
    }
    CHECK(std::abs(kendall_tau(lo1, lo3) - 0.2) < 0.05);
    CHECK(std::abs(kendall_tau(hi1, hi3) + 0.2) < 0.05);
}

TEST_CASE("Frank vine density") {
    const FrankVineSpec spec{3, TauCase::B, 0.6};
    const double th1 = oracle::frank_theta(0.25);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const double u1 = unif(rng), u2 = unif(rng), u3 = unif(rng);
        const double th2 = oracle::frank_theta(std::abs(0.6 - 1.2 * u2)) * (u2 > 0.5 ? -1 : 1);
        const double expect = oracle::frank_density(u1, u2, th1) * oracle::frank_density(u2, u3, th1) *
                              oracle::frank_density(oracle_h(u1, u2, th1), oracle_h(u3, u2, th1), th2);
        const std::vector<double> u{u1, u2, u3};
        CHECK(frank_vine_density(spec, u) == doctest::Approx(expect).epsilon(1e-7));
    }

    // zero conditional tau leaves only the first tree
    const FrankVineSpec flat{3, TauCase::Constant, 0.0};
    const std::vector<double> u{0.3, 0.8, 0.45};
    CHECK(frank_vine_density(flat, u) ==
          doctest::Approx(oracle::frank_density(0.3, 0.8, th1) * oracle::frank_density(0.8, 0.45, th1)).epsilon(1e-8));

    const Eigen::MatrixXd pts = oracle::uniform_sample(200000, 3, 6);
    double mass = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        const std::vector<double> p{pts(i, 0), pts(i, 1), pts(i, 2)};
        mass += frank_vine_density(spec, p);
    }
    CHECK(std::abs(mass / pts.rows() - 1.0) < 0.01);
}

TEST_CASE("own samples score higher than column-permuted samples") {
    for (const FrankVineSpec spec : {FrankVineSpec{3, TauCase::B, 0.6}, FrankVineSpec{5, TauCase::A, 0.4}}) {
        for (std::uint64_t rep = 0; rep < 10; ++rep) {
            Eigen::MatrixXd x = simulate_frank_vine(spec, 300, 100 + rep);
            auto avg = [&](const Eigen::MatrixXd& m) {
                double s = 0.0;
                for (Eigen::Index i = 0; i < m.rows(); ++i) {
                    std::vector<double> row(m.cols());
                    for (Eigen::Index j = 0; j < m.cols(); ++j)
                        row[j] = m(i, j);
                    s += frank_vine_log_density(spec, row);
                }
                return s / static_cast<double>(m.rows());
            };
            const double own = avg(x);
            std::mt19937_64 rng(rep);
            for (int j = 0; j < spec.p; ++j) {
                std::vector<double> c = col(x, j);
                std::shuffle(c.begin(), c.end(), rng);
                for (Eigen::Index i = 0; i < x.rows(); ++i)
                    x(i, j) = c[i];
            }
            CHECK(own > avg(x));
        }
    }
}

TEST_CASE("normal mixture presets and sampling") {
    const NormalMixtureSpec s3 = NormalMixtureSpec::preset(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(s3.sigma1(i, j) == doctest::Approx(i == j ? 1.0 : -0.4));
    const NormalMixtureSpec s5 = NormalMixtureSpec::preset(5);
    CHECK(s5.sigma2(3, 0) == doctest::Approx(-0.2));
    CHECK(s5.sigma2(0, 4) == doctest::Approx(-0.1));
    CHECK(s5.sigma2(2, 1) == doctest::Approx(-0.4));
    CHECK_THROWS_AS(NormalMixtureSpec::preset(4), std::invalid_argument);

    const MixtureSample m = simulate_normal_mixture(s3, 10000, 7);
    CHECK(std::abs(m.component.cast<double>().mean() - 0.5) < 0.02);
    for (int j = 0; j < 3; ++j)
        CHECK(ks_uniform(col(m.copula.topRows(5000), j)) < ks_crit_1pct(5000));
    const MixtureSample m5 = simulate_normal_mixture(s5, 5000, 8);
    for (int j = 0; j < 5; ++j)
        CHECK(ks_uniform(col(m5.copula, j)) < ks_crit_1pct(5000));

    NormalMixtureSpec bad = s3;
    bad.sigma2(0, 0) = -1.0;
    CHECK_THROWS_AS(simulate_normal_mixture(bad, 10, 1), std::invalid_argument);
}

TEST_CASE("normal mixture copula density") {
    NormalMixtureSpec same = NormalMixtureSpec::preset(3);
    same.mu2 = same.mu1 * 0.0 + Eigen::VectorXd::Constant(3, 0.3);
    same.mu1 = same.mu2;
    same.sigma1 << 2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 0.5;
    same.sigma2 = same.sigma1;
    const Eigen::VectorXd sd = same.sigma1.diagonal().cwiseSqrt();
    const Eigen::MatrixXd R = sd.cwiseInverse().asDiagonal() * same.sigma1 * sd.cwiseInverse().asDiagonal();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> u{unif(rng), unif(rng), unif(rng)};
        CHECK(std::exp(mixture_copula_log_density(same, u)) ==
              doctest::Approx(gaussian_copula_density(R, u)).epsilon(1e-8));
    }

    const NormalMixtureSpec s3 = NormalMixtureSpec::preset(3);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> u{unif(rng), unif(rng), unif(rng)};
        const double base = mixture_copula_log_density(s3, u);
        std::sort(u.begin(), u.end());
        do {
            CHECK(mixture_copula_log_density(s3, u) == doctest::Approx(base).epsilon(1e-10));
        } while (std::next_permutation(u.begin(), u.end()));
    }
    for (double x : {-2.0, 0.0, 1.5})
        CHECK(mixture_marginal_quantile(s3, 1, mixture_marginal_cdf(s3, 1, x)) == doctest::Approx(x).epsilon(1e-10));

    const Eigen::MatrixXd pts = oracle::uniform_sample(200000, 3, 10);
    double mass = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        const std::vector<double> p{pts(i, 0), pts(i, 1), pts(i, 2)};
        mass += std::exp(mixture_copula_log_density(s3, p));
    }
    CHECK(std::abs(mass / pts.rows() - 1.0) < 0.01);
}

TEST_CASE("reproducibility and spec parsing") {
    const DgpSpec d = DgpSpec::parse("frank:p=5,case=a,beta=0.2");
    CHECK(d.dim() == 5);
    CHECK(d.frank.tau_case == TauCase::A);
    const Eigen::MatrixXd a = d.simulate(100, 42), b = d.simulate(100, 42);
    CHECK((a.array() == b.array()).all());
    CHECK((a.array() != d.simulate(100, 43).array()).any());
    CHECK((a.array() != d.simulate(100, 42, 1).array()).any());
    CHECK(DgpSpec::parse(d.to_string()).to_string() == d.to_string());

    const DgpSpec m = DgpSpec::parse("mixture:p=5");
    CHECK(m.dim() == 5);
    CHECK((m.simulate(50, 1).array() == m.simulate(50, 1).array()).all());
    CHECK(DgpSpec::parse("frank:p=3,case=const,beta=0.3").frank.tau_case == TauCase::Constant);
    CHECK_THROWS_AS(DgpSpec::parse("gumbel:p=3"), std::invalid_argument);
    CHECK_THROWS_AS(DgpSpec::parse("frank:p=3,foo=1"), std::invalid_argument);
    CHECK_THROWS_AS(DgpSpec::parse("frank:p=3,beta=1.5"), std::invalid_argument);
}
