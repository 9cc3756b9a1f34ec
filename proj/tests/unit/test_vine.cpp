#include <doctest.h>

#include "ncvine/copula.hpp"
#include "ncvine/dgp.hpp"
#include "ncvine/vine.hpp"
#include "oracles.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <map>
#include <set>

using namespace ncvine;

namespace {

const Eigen::MatrixXd& case_b_data() {
    static const Eigen::MatrixXd U = simulate_frank_vine({3, TauCase::B, 0.6}, 2000, 1);
    return U;
}

const FittedVine& fitted(Estimator m) {
    static std::map<Estimator, FittedVine> cache;
    auto it = cache.find(m);
    if (it == cache.end())
        it = cache.emplace(m, fit_vine(case_b_data(), m)).first;
    return it->second;
}

double ks_uniform(const Eigen::VectorXd& v) {
    std::vector<double> x(v.data(), v.data() + v.size());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        d = std::max({d, (i + 1) / n - x[i], x[i] - i / n});
    return d;
}

// h-function by quadrature of the pair density
double quad_h(const CopulaFit& f, double target, double given, std::optional<double> w, bool first) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    auto dens = [&](double s) {
        return density_eval(f, first ? EvalPoint{s, given, w} : EvalPoint{given, s, w});
    };
    double part = 0.0, total = 0.0;
    const int K = 1 << f.spec.d;
    for (int k = 0; k < K; ++k) {
        const double lo = static_cast<double>(k) / K, hi = static_cast<double>(k + 1) / K;
        total += GK::integrate(dens, lo, hi, 8, 1e-12);
        if (target > lo)
            part += GK::integrate(dens, lo, std::min(hi, target), 8, 1e-12);
    }
    return part / total;
}

// Three-dimensional vine density written out edge by edge.
double direct_log_density(const FittedVine& fv, const std::vector<double>& u) {
    const auto& t1 = fv.structure.trees[0];
    const auto& e2 = fv.structure.trees[1][0];
    const auto& f2 = fv.edges[1][0];
    double s = 0.0;
    double h[2];
    for (int k = 0; k < 2; ++k) {
        const VineEdge& e = t1[k];
        const CopulaFit& f = fv.edges[0][k].active();
        s += std::log(density_eval(f, {u[e.a], u[e.b]}));
        // conditional cdf of the variable that tree 2 keeps, given the shared one
        const int keep = k == 0 ? e2.a : e2.b;
        h[k] = keep == e.a ? quad_h(f, u[e.a], u[e.b], {}, true) : quad_h(f, u[e.b], u[e.a], {}, false);
    }
    std::optional<double> w;
    if (f2.is_conditional())
        w = u[e2.cond[0]];
    s += std::log(density_eval(f2.active(), {h[0], h[1], w}));
    return s;
}

std::set<std::pair<std::pair<int, int>, std::vector<int>>> edge_labels(const VineStructure& s,
                                                                      const std::vector<int>& map) {
    std::set<std::pair<std::pair<int, int>, std::vector<int>>> out;
    for (const auto& tree : s.trees)
        for (const auto& e : tree) {
            std::vector<int> c;
            for (int v : e.cond)
                c.push_back(map[v]);
            std::sort(c.begin(), c.end());
            out.insert({{std::min(map[e.a], map[e.b]), std::max(map[e.a], map[e.b])}, c});
        }
    return out;
}

}  // namespace

TEST_CASE("two variables give a single edge") {
    const Eigen::MatrixXd U = oracle::frank_sample(300, 3.0, 1);
    const VineStructure s = select_structure(U);
    REQUIRE(s.trees.size() == 1);
    CHECK(s.trees[0].size() == 1);
    CHECK(s.is_valid());
    const FittedVine fv = fit_vine(U, Estimator::Cond);
    CHECK_FALSE(fv.edges[0][0].is_conditional());
    CHECK_FALSE(fv.edges[0][0].test.has_value());
}

TEST_CASE("tree 1 keeps the strong pairs") {
    const VineStructure s = fitted(Estimator::SimpA).structure;
    CHECK(s.is_valid());
    std::set<std::pair<int, int>> t1;
    for (const auto& e : s.trees[0])
        t1.insert({e.a, e.b});
    CHECK(t1 == std::set<std::pair<int, int>>{{0, 1}, {1, 2}});
    CHECK(s.trees[1][0].cond == std::vector<int>{1});

    const Eigen::MatrixXd U = simulate_frank_vine({3, TauCase::B, 0.2}, 1000, 2);
    std::set<std::pair<int, int>> t2;
    const VineStructure s2 = select_structure(U);
    for (const auto& e : s2.trees[0])
        t2.insert({e.a, e.b});
    CHECK(t2 == std::set<std::pair<int, int>>{{0, 1}, {1, 2}});
}

TEST_CASE("five-dimensional structures satisfy the proximity condition") {
    const Eigen::MatrixXd U = simulate_frank_vine({5, TauCase::A, 0.4}, 400, 3);
    const FittedVine fv = fit_vine(U, Estimator::Cond);
    CHECK(fv.structure.is_valid());
    for (std::size_t t = 1; t < fv.edges.size(); ++t)
        for (const auto& e : fv.edges[t]) {
            CHECK(e.is_conditional());
            CHECK(e.reduction.has_value());
        }
    VineStructure broken = fv.structure;
    std::swap(broken.trees[1][0].cond, broken.trees[2][0].cond);
    CHECK_FALSE(broken.is_valid());
    VineConfig cfg;
    cfg.threads = 3;
    CHECK(to_json(fit_vine(U, Estimator::Cond, cfg)) == to_json(fv));
}

TEST_CASE("case b violation is detected and fitted conditionally") {
    const FittedVine& test = fitted(Estimator::Test);
    const EdgeFit& e = test.edges[1][0];
    REQUIRE(e.test.has_value());
    CHECK(e.test->reject);
    CHECK(e.is_conditional());
    for (const auto& t1 : test.edges[0])
        CHECK_FALSE(t1.is_conditional());
    // SimpA records the same test but keeps the partial fit
    const EdgeFit& s = fitted(Estimator::SimpA).edges[1][0];
    CHECK(s.test->statistic == e.test->statistic);
    CHECK_FALSE(s.is_conditional());
    CHECK(s.partial.coeffs == e.partial.coeffs);
}

TEST_CASE("Test without rejections equals SimpA") {
    const Eigen::MatrixXd U = simulate_frank_vine({3, TauCase::Constant, 0.3}, 600, 4);
    const FittedVine a = fit_vine(U, Estimator::SimpA), b = fit_vine(U, Estimator::Test);
    bool any = false;
    for (const auto& tree : b.edges)
        for (const auto& e : tree)
            any = any || (e.test && e.test->reject);
    REQUIRE_FALSE(any);
    for (std::size_t t = 0; t < a.edges.size(); ++t)
        for (std::size_t k = 0; k < a.edges[t].size(); ++k) {
            CHECK(a.edges[t][k].active().coeffs == b.edges[t][k].active().coeffs);
            CHECK_FALSE(b.edges[t][k].is_conditional());
        }
}

TEST_CASE("vine density matches a direct three-dimensional evaluation") {
    const Eigen::MatrixXd pts = oracle::uniform_sample(30, 3, 7);
    for (Estimator m : {Estimator::SimpA, Estimator::Cond}) {
        const FittedVine& fv = fitted(m);
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            const std::vector<double> u{pts(i, 0), pts(i, 1), pts(i, 2)};
            CHECK(vine_log_density(fv, u) == doctest::Approx(direct_log_density(fv, u)).epsilon(1e-8));
        }
    }
}

TEST_CASE("fitted vine densities integrate to one") {
    const Eigen::MatrixXd pts = oracle::uniform_sample(100000, 3, 8);
    for (Estimator m : {Estimator::SimpA, Estimator::Cond}) {
        const double mass = vine_log_density(fitted(m), pts).array().exp().mean();
        CHECK(std::abs(mass - 1.0) < 0.02);
    }
    const Eigen::MatrixXd U5 = simulate_frank_vine({5, TauCase::B, 0.4}, 500, 9);
    const Eigen::MatrixXd pts5 = oracle::uniform_sample(100000, 5, 10);
    const double mass5 = vine_log_density(fit_vine(U5, Estimator::Cond), pts5).array().exp().mean();
    CHECK(std::abs(mass5 - 1.0) < 0.02);
}

TEST_CASE("independence edges give log density zero") {
    FittedVine fv = fitted(Estimator::Cond);
    for (auto& tree : fv.edges)
        for (auto& e : tree) {
            e.partial.coeffs = independence_coeffs(e.partial.spec);
            if (e.conditional)
                e.conditional->coeffs = independence_coeffs(e.conditional->spec);
        }
    const Eigen::VectorXd ld = vine_log_density(fv, oracle::uniform_sample(200, 3, 11));
    CHECK(ld.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tree-2 pseudo-observations are close to uniform") {
    const FittedVine& fv = fitted(Estimator::SimpA);
    const Eigen::MatrixXd& U = case_b_data();
    for (std::size_t k = 0; k < 2; ++k) {
        const VineEdge& e = fv.structure.trees[0][k];
        const CopulaFit& f = fv.edges[0][k].active();
        const Eigen::VectorXd u = U.col(e.a), v = U.col(e.b);
        CHECK(ks_uniform(h_function(f, u, v, {}, HAxis::First)) < 0.1);
        CHECK(ks_uniform(h_function(f, v, u, {}, HAxis::Second)) < 0.1);
    }
}

TEST_CASE("relabeling variables relabels the structure") {
    const Eigen::MatrixXd U = simulate_frank_vine({5, TauCase::A, 0.6}, 500, 12);
    const std::vector<int> perm{3, 0, 4, 1, 2};  // new column j holds old column perm[j]
    Eigen::MatrixXd V(U.rows(), 5);
    for (int j = 0; j < 5; ++j)
        V.col(j) = U.col(perm[j]);
    const std::vector<int> id{0, 1, 2, 3, 4};
    CHECK(edge_labels(select_structure(V), perm) == edge_labels(select_structure(U), id));
}

TEST_CASE("JSON round trip is exact") {
    for (Estimator m : {Estimator::SimpA, Estimator::Test}) {
        const FittedVine& fv = fitted(m);
        const std::string doc = to_json(fv);
        const FittedVine back = fitted_vine_from_json(doc);
        CHECK(to_json(back) == doc);
        CHECK(back.structure == fv.structure);
        CHECK(back.mode == m);
        CHECK(implied_estimator(fv) == m);
        for (std::size_t t = 0; t < fv.edges.size(); ++t)
            for (std::size_t k = 0; k < fv.edges[t].size(); ++k) {
                CHECK(back.edges[t][k].active().coeffs == fv.edges[t][k].active().coeffs);
                CHECK(back.edges[t][k].active().lambda == fv.edges[t][k].active().lambda);
            }
        const Eigen::MatrixXd pts = oracle::uniform_sample(100, 3, 13);
        CHECK(vine_log_density(back, pts) == vine_log_density(fv, pts));
    }
    CHECK_THROWS_AS(fitted_vine_from_json("{}"), std::invalid_argument);
    CHECK_THROWS_AS(fitted_vine_from_json("not json"), std::invalid_argument);
}

TEST_CASE("argument validation") {
    CHECK_THROWS_AS(fit_vine(Eigen::MatrixXd::Constant(10, 1, 0.5), Estimator::SimpA), std::invalid_argument);
    CHECK_THROWS_AS(fit_vine(Eigen::MatrixXd::Constant(10, 3, 1.5), Estimator::SimpA), std::domain_error);
    CHECK_THROWS_AS(vine_log_density(fitted(Estimator::SimpA), Eigen::MatrixXd::Constant(2, 2, 0.5)),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_estimator("Simp"), std::invalid_argument);
    VineConfig bad;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(fit_vine(case_b_data(), Estimator::Test, bad), std::invalid_argument);
}
