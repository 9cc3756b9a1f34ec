#include "ncvine/vine.hpp"

#include "ncvine/copula.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <set>
#include <stdexcept>
#include <tuple>

namespace ncvine {

using nlohmann::json;

std::string to_string(Estimator e) {
    switch (e) {
    case Estimator::SimpA:
        return "SimpA";
    case Estimator::Cond:
        return "Cond";
    case Estimator::Test:
        return "Test";
    }
    return "SimpA";
}

Estimator parse_estimator(const std::string& name) {
    if (name == "SimpA")
        return Estimator::SimpA;
    if (name == "Cond")
        return Estimator::Cond;
    if (name == "Test")
        return Estimator::Test;
    throw std::invalid_argument("unknown estimator '" + name + "' (SimpA, Cond, Test)");
}

void VineConfig::validate() const {
    spec2.validate();
    spec3.validate();
    fit.validate();
    if (spec2.q != 2 || spec3.q != 3)
        throw std::invalid_argument("vine config: spec2 must have q = 2 and spec3 q = 3");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("vine config: alpha must lie in (0,1)");
    if (sa_groups < 2)
        throw std::invalid_argument("vine config: need at least two test groups");
    if (threads < 1)
        throw std::invalid_argument("vine config: threads must be positive");
}

namespace {

std::set<int> complete_union(const VineEdge& e) {
    std::set<int> s(e.cond.begin(), e.cond.end());
    s.insert(e.a);
    s.insert(e.b);
    return s;
}

bool adjacent(const VineEdge& e, const VineEdge& f) {
    return e.left == f.left || e.left == f.right || e.right == f.left || e.right == f.right;
}

// Edge joining nodes e < f of the previous tree.
VineEdge join(const std::vector<VineEdge>& prev, int e, int f) {
    const std::set<int> ce = complete_union(prev[e]), cf = complete_union(prev[f]);
    VineEdge out;
    out.left = e;
    out.right = f;
    std::vector<int> only_e, only_f;
    std::set_difference(ce.begin(), ce.end(), cf.begin(), cf.end(), std::back_inserter(only_e));
    std::set_difference(cf.begin(), cf.end(), ce.begin(), ce.end(), std::back_inserter(only_f));
    std::set_intersection(ce.begin(), ce.end(), cf.begin(), cf.end(), std::back_inserter(out.cond));
    if (only_e.size() != 1 || only_f.size() != 1)
        throw std::logic_error("vine: joined edges violate the proximity condition");
    out.a = only_e[0];
    out.b = only_f[0];
    return out;
}

// Pseudo-observations of a node: conditional cdfs of its conditioned variables.
struct NodeObs {
    int var[2] = {0, 0};
    Eigen::VectorXd val[2];

    const Eigen::VectorXd& of(int v) const {
        if (var[0] == v)
            return val[0];
        if (var[1] == v)
            return val[1];
        throw std::logic_error("vine: variable not carried by node");
    }
};

std::vector<NodeObs> leaf_obs(const Eigen::MatrixXd& U) {
    std::vector<NodeObs> nodes(U.cols());
    for (Eigen::Index j = 0; j < U.cols(); ++j) {
        nodes[j].var[0] = nodes[j].var[1] = static_cast<int>(j);
        nodes[j].val[0] = nodes[j].val[1] = U.col(j);
    }
    return nodes;
}

Eigen::MatrixXd pair_data(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    Eigen::MatrixXd m(u.size(), 2);
    m.col(0) = u;
    m.col(1) = v;
    return m;
}

Eigen::MatrixXd columns_of(const Eigen::MatrixXd& U, const std::vector<int>& idx) {
    Eigen::MatrixXd m(U.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
        m.col(static_cast<Eigen::Index>(k)) = U.col(idx[k]);
    return m;
}

struct Candidate {
    VineEdge edge;
    CopulaFit fit;
};

std::vector<Candidate> fit_candidates(const std::vector<VineEdge>& edges,
                                      const std::vector<NodeObs>& nodes, const VineConfig& cfg) {
    auto one = [&](const VineEdge& e) {
        const Eigen::MatrixXd data = pair_data(nodes[e.left].of(e.a), nodes[e.right].of(e.b));
        return Candidate{e, fit_copula_density(data, cfg.spec2, cfg.fit)};
    };
    std::vector<Candidate> out;
    out.reserve(edges.size());
    if (cfg.threads <= 1) {
        for (const auto& e : edges)
            out.push_back(one(e));
        return out;
    }
    for (std::size_t start = 0; start < edges.size(); start += cfg.threads) {
        std::vector<std::future<Candidate>> jobs;
        for (std::size_t k = start; k < std::min(edges.size(), start + cfg.threads); ++k)
            jobs.push_back(std::async(std::launch::async, one, std::cref(edges[k])));
        for (auto& j : jobs)
            out.push_back(j.get());
    }
    return out;
}

// Prim over `count` nodes; ties broken by (left, right).
std::vector<Candidate> minimum_spanning_tree(std::vector<Candidate> cand, int count) {
    std::vector<bool> in(count, false);
    in[0] = true;
    std::vector<Candidate> tree;
    for (int step = 1; step < count; ++step) {
        int best = -1;
        auto key = [&](int k) {
            return std::make_tuple(cand[k].fit.caic, cand[k].edge.left, cand[k].edge.right);
        };
        for (int k = 0; k < static_cast<int>(cand.size()); ++k) {
            const bool crosses = in[cand[k].edge.left] != in[cand[k].edge.right];
            if (crosses && (best < 0 || key(k) < key(best)))
                best = k;
        }
        if (best < 0)
            throw std::logic_error("vine: candidate graph is disconnected");
        in[cand[best].edge.left] = in[cand[best].edge.right] = true;
        tree.push_back(std::move(cand[best]));
    }
    std::sort(tree.begin(), tree.end(), [](const Candidate& x, const Candidate& y) {
        return std::tie(x.edge.left, x.edge.right) < std::tie(y.edge.left, y.edge.right);
    });
    return tree;
}

std::vector<VineEdge> candidate_edges(int tree, int p, const std::vector<VineEdge>& prev) {
    std::vector<VineEdge> out;
    if (tree == 0) {
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j)
                out.push_back({i, j, {}, i, j});
        return out;
    }
    for (int e = 0; e < static_cast<int>(prev.size()); ++e)
        for (int f = e + 1; f < static_cast<int>(prev.size()); ++f)
            if (adjacent(prev[e], prev[f]))
                out.push_back(join(prev, e, f));
    return out;
}

void check_data(const Eigen::MatrixXd& U) {
    if (U.cols() < 2)
        throw std::invalid_argument("vine: need at least two columns");
    if (U.rows() < 2)
        throw std::invalid_argument("vine: need at least two observations");
    if (!U.allFinite() || U.minCoeff() < 0.0 || U.maxCoeff() > 1.0)
        throw std::domain_error("vine: pseudo-observations must lie in [0,1]");
}

FittedVine fit_impl(const Eigen::MatrixXd& U, Estimator mode, const VineConfig& cfg,
                    bool structure_only) {
    cfg.validate();
    check_data(U);
    const int p = static_cast<int>(U.cols());
    FittedVine fv;
    fv.mode = mode;
    fv.config = cfg;
    fv.n = static_cast<int>(U.rows());
    fv.structure.p = p;
    std::vector<NodeObs> nodes = leaf_obs(U);
    for (int t = 0; t + 1 < p; ++t) {
        const auto& prev = t == 0 ? std::vector<VineEdge>{} : fv.structure.trees.back();
        std::vector<Candidate> chosen;
        try {
            chosen = minimum_spanning_tree(fit_candidates(candidate_edges(t, p, prev), nodes, cfg),
                                           static_cast<int>(nodes.size()));
        } catch (const std::exception& ex) {
            throw std::runtime_error("vine tree " + std::to_string(t + 1) + ": " + ex.what());
        }
        std::vector<VineEdge> tree;
        std::vector<EdgeFit> fits;
        std::vector<NodeObs> next;
        for (auto& c : chosen) {
            const VineEdge& e = c.edge;
            const Eigen::VectorXd& u = nodes[e.left].of(e.a);
            const Eigen::VectorXd& v = nodes[e.right].of(e.b);
            EdgeFit ef;
            ef.partial = std::move(c.fit);
            Eigen::VectorXd w;
            if (!e.cond.empty() && !structure_only) {
                ConditioningReduction red = reduce_conditioners(columns_of(U, e.cond));
                w = red.reduced;
                if (U.rows() >= static_cast<Eigen::Index>(cfg.sa_groups) * kMinGroupSize)
                    ef.test = test_simplifying(u, v, w, cfg.alpha, cfg.sa_groups);
                const bool conditional = mode == Estimator::Cond ||
                                         (mode == Estimator::Test && ef.test && ef.test->reject);
                if (conditional) {
                    Eigen::MatrixXd data(U.rows(), 3);
                    data << u, v, w;
                    try {
                        ef.conditional = fit_copula_density(data, cfg.spec3, cfg.fit);
                    } catch (const std::exception& ex) {
                        throw std::runtime_error("vine edge " + std::to_string(e.a + 1) + "," +
                                                 std::to_string(e.b + 1) + " (conditional): " + ex.what());
                    }
                    red.scores.resize(0);
                    red.reduced.resize(0);
                    ef.reduction = std::move(red);
                }
            }
            if (t + 2 < p) {
                NodeObs o;
                o.var[0] = e.a;
                o.var[1] = e.b;
                o.val[0] = h_function(ef.active(), u, v, w, HAxis::First);
                o.val[1] = h_function(ef.active(), v, u, w, HAxis::Second);
                next.push_back(std::move(o));
            }
            tree.push_back(e);
            fits.push_back(std::move(ef));
        }
        fv.structure.trees.push_back(std::move(tree));
        fv.edges.push_back(std::move(fits));
        nodes = std::move(next);
    }
    return fv;
}

}  // namespace

bool VineStructure::is_valid() const {
    if (p < 2 || static_cast<int>(trees.size()) != p - 1)
        return false;
    for (int t = 0; t < p - 1; ++t) {
        const auto& tree = trees[t];
        const int nodes = p - t;
        if (static_cast<int>(tree.size()) != nodes - 1)
            return false;
        // spanning: union-find over the nodes
        std::vector<int> parent(nodes);
        for (int k = 0; k < nodes; ++k)
            parent[k] = k;
        auto find = [&](int x) {
            while (parent[x] != x)
                x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto& e : tree) {
            if (e.left < 0 || e.right < 0 || e.left >= nodes || e.right >= nodes)
                return false;
            const int a = find(e.left), b = find(e.right);
            if (a == b)
                return false;
            parent[a] = b;
            if (t == 0) {
                if (!e.cond.empty() || e.a != e.left || e.b != e.right)
                    return false;
                continue;
            }
            const auto& prev = trees[t - 1];
            if (!adjacent(prev[e.left], prev[e.right]))
                return false;
            if (static_cast<int>(e.cond.size()) != t)
                return false;
            const VineEdge j = join(prev, std::min(e.left, e.right), std::max(e.left, e.right));
            if (j.cond != e.cond)
                return false;
        }
    }
    return true;
}

double FittedVine::loglik() const {
    double s = 0.0;
    for (const auto& tree : edges)
        for (const auto& e : tree)
            s += e.active().loglik;
    return s;
}

VineStructure select_structure(const Eigen::MatrixXd& U, const VineConfig& config) {
    return fit_impl(U, Estimator::SimpA, config, true).structure;
}

FittedVine fit_vine(const Eigen::MatrixXd& U, Estimator mode, const VineConfig& config) {
    return fit_impl(U, mode, config, false);
}

Eigen::VectorXd vine_log_density(const FittedVine& fv, const Eigen::MatrixXd& points) {
    const int p = fv.structure.p;
    if (points.cols() != p)
        throw std::invalid_argument("vine_log_density: expected " + std::to_string(p) + " columns");
    if (points.rows() == 0)
        return {};
    if (!points.allFinite() || points.minCoeff() < 0.0 || points.maxCoeff() > 1.0)
        throw std::domain_error("vine_log_density: points must lie in [0,1]");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(points.rows());
    std::vector<NodeObs> nodes = leaf_obs(points);
    for (int t = 0; t + 1 < p; ++t) {
        std::vector<NodeObs> next;
        for (std::size_t k = 0; k < fv.structure.trees[t].size(); ++k) {
            const VineEdge& e = fv.structure.trees[t][k];
            const EdgeFit& ef = fv.edges[t][k];
            const Eigen::VectorXd& u = nodes[e.left].of(e.a);
            const Eigen::VectorXd& v = nodes[e.right].of(e.b);
            Eigen::VectorXd w;
            Eigen::MatrixXd data(points.rows(), ef.is_conditional() ? 3 : 2);
            data.col(0) = u;
            data.col(1) = v;
            if (ef.is_conditional()) {
                w = ef.reduction->project(columns_of(points, e.cond));
                data.col(2) = w;
            }
            out += density_values(ef.active(), data).cwiseMax(1e-300).array().log().matrix();
            if (t + 2 < p) {
                NodeObs o;
                o.var[0] = e.a;
                o.var[1] = e.b;
                o.val[0] = h_function(ef.active(), u, v, w, HAxis::First);
                o.val[1] = h_function(ef.active(), v, u, w, HAxis::Second);
                next.push_back(std::move(o));
            }
        }
        nodes = std::move(next);
    }
    return out;
}

double vine_log_density(const FittedVine& fv, std::span<const double> u) {
    Eigen::MatrixXd m(1, static_cast<Eigen::Index>(u.size()));
    for (std::size_t j = 0; j < u.size(); ++j)
        m(0, static_cast<Eigen::Index>(j)) = u[j];
    return vine_log_density(fv, m)[0];
}

Estimator implied_estimator(const FittedVine& fv) {
    bool any = false, gated = true;
    for (std::size_t t = 1; t < fv.edges.size(); ++t)
        for (const auto& e : fv.edges[t]) {
            any = any || e.is_conditional();
            gated = gated && e.test.has_value() && e.test->reject == e.is_conditional();
        }
    if (!any)
        return Estimator::SimpA;
    return gated ? Estimator::Test : Estimator::Cond;
}

// ---- serialization ----

namespace {

json vec(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec(const json& j) {
    const auto s = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

json spec_json(const SparseBasisSpec& s) {
    return {{"d", s.d}, {"D", s.D}, {"q", s.q}};
}

SparseBasisSpec spec_from(const json& j) {
    SparseBasisSpec s{j.at("d").get<int>(), j.at("D").get<int>(), j.at("q").get<int>()};
    s.validate();
    return s;
}

json fit_json(const CopulaFit& f) {
    return {{"spec", spec_json(f.spec)},
            {"coeffs", vec(f.coeffs)},
            {"lambda", f.lambda},
            {"loglik", f.loglik},
            {"penalized_loglik", f.penalized_loglik},
            {"df", f.df},
            {"caic", f.caic},
            {"n", f.n},
            {"iterations", f.iterations},
            {"converged", f.converged},
            {"lambda_capped", f.lambda_capped},
            {"warning", f.warning}};
}

CopulaFit fit_from(const json& j) {
    CopulaFit f;
    f.spec = spec_from(j.at("spec"));
    f.coeffs = vec(j.at("coeffs"));
    if (f.coeffs.size() != sparse_basis_size(f.spec))
        throw std::invalid_argument("model: coefficient count does not match the basis");
    f.lambda = j.at("lambda").get<double>();
    f.loglik = j.at("loglik").get<double>();
    f.penalized_loglik = j.at("penalized_loglik").get<double>();
    f.df = j.at("df").get<double>();
    f.caic = j.at("caic").get<double>();
    f.n = j.at("n").get<int>();
    f.iterations = j.at("iterations").get<int>();
    f.converged = j.at("converged").get<bool>();
    f.lambda_capped = j.at("lambda_capped").get<bool>();
    f.warning = j.at("warning").get<std::string>();
    return f;
}

json test_json(const SaTestResult& r) {
    return {{"statistic", r.statistic},
            {"pvalue", r.pvalue},
            {"df", r.df},
            {"reject", r.reject},
            {"alpha", r.alpha},
            {"groups",
             {{"count", r.groups.count},
              {"cuts", r.groups.cuts},
              {"sizes", r.groups.sizes},
              {"tau", r.groups.tau},
              {"quadrant", r.groups.quadrant}}}};
}

SaTestResult test_from(const json& j) {
    SaTestResult r;
    r.statistic = j.at("statistic").get<double>();
    r.pvalue = j.at("pvalue").get<double>();
    r.df = j.at("df").get<int>();
    r.reject = j.at("reject").get<bool>();
    r.alpha = j.at("alpha").get<double>();
    const json& g = j.at("groups");
    r.groups.count = g.at("count").get<int>();
    r.groups.cuts = g.at("cuts").get<std::vector<double>>();
    r.groups.sizes = g.at("sizes").get<std::vector<int>>();
    r.groups.tau = g.at("tau").get<std::vector<double>>();
    r.groups.quadrant = g.at("quadrant").get<std::vector<double>>();
    return r;
}

json reduction_json(const ConditioningReduction& r) {
    return {{"loading", vec(r.loading)},
            {"means", vec(r.means)},
            {"map_scores", r.map_scores},
            {"map_ranks", r.map_ranks}};
}

ConditioningReduction reduction_from(const json& j) {
    ConditioningReduction r;
    r.loading = vec(j.at("loading"));
    r.means = vec(j.at("means"));
    r.map_scores = j.at("map_scores").get<std::vector<double>>();
    r.map_ranks = j.at("map_ranks").get<std::vector<double>>();
    if (r.means.size() != r.loading.size() || r.map_scores.size() != r.map_ranks.size())
        throw std::invalid_argument("model: inconsistent conditioning reduction");
    return r;
}

}  // namespace

std::string to_json(const FittedVine& fv) {
    json trees = json::array();
    for (std::size_t t = 0; t < fv.structure.trees.size(); ++t) {
        json tree = json::array();
        for (std::size_t k = 0; k < fv.structure.trees[t].size(); ++k) {
            const VineEdge& e = fv.structure.trees[t][k];
            const EdgeFit& ef = fv.edges[t][k];
            json je = {{"a", e.a},
                       {"b", e.b},
                       {"cond", e.cond},
                       {"left", e.left},
                       {"right", e.right},
                       {"flag", ef.is_conditional() ? "conditional" : "partial"},
                       {"partial", fit_json(ef.partial)}};
            if (ef.conditional)
                je["conditional"] = fit_json(*ef.conditional);
            if (ef.reduction)
                je["reduction"] = reduction_json(*ef.reduction);
            if (ef.test)
                je["test"] = test_json(*ef.test);
            tree.push_back(std::move(je));
        }
        trees.push_back(std::move(tree));
    }
    const FitConfig& fc = fv.config.fit;
    const json doc = {
        {"format", "ncvine-fitted-vine"},
        {"version", 1},
        {"p", fv.structure.p},
        {"n", fv.n},
        {"config",
         {{"spec2", spec_json(fv.config.spec2)},
          {"spec3", spec_json(fv.config.spec3)},
          {"alpha", fv.config.alpha},
          {"sa_groups", fv.config.sa_groups},
          {"fit",
           {{"lambda_starts", fc.lambda_starts},
            {"max_outer_iters", fc.max_outer_iters},
            {"tol_coeff", fc.tol_coeff},
            {"tol_lambda", fc.tol_lambda},
            {"lambda_cap", fc.lambda_cap},
            {"lambda_floor", fc.lambda_floor},
            {"saturation_trace", fc.saturation_trace},
            {"penalty_order", fc.penalty_order},
            {"update_lambda", fc.update_lambda}}}}},
        {"trees", trees}};
    return doc.dump(1);
}

FittedVine fitted_vine_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& ex) {
        throw std::invalid_argument(std::string("model: not valid JSON: ") + ex.what());
    }
    try {
        if (doc.at("format") != "ncvine-fitted-vine" || doc.at("version") != 1)
            throw std::invalid_argument("model: unsupported format");
        FittedVine fv;
        fv.structure.p = doc.at("p").get<int>();
        fv.n = doc.at("n").get<int>();
        const json& c = doc.at("config");
        fv.config.spec2 = spec_from(c.at("spec2"));
        fv.config.spec3 = spec_from(c.at("spec3"));
        fv.config.alpha = c.at("alpha").get<double>();
        fv.config.sa_groups = c.at("sa_groups").get<int>();
        const json& f = c.at("fit");
        FitConfig& fc = fv.config.fit;
        fc.lambda_starts = f.at("lambda_starts").get<std::vector<double>>();
        fc.max_outer_iters = f.at("max_outer_iters").get<int>();
        fc.tol_coeff = f.at("tol_coeff").get<double>();
        fc.tol_lambda = f.at("tol_lambda").get<double>();
        fc.lambda_cap = f.at("lambda_cap").get<double>();
        fc.lambda_floor = f.at("lambda_floor").get<double>();
        fc.saturation_trace = f.at("saturation_trace").get<double>();
        fc.penalty_order = f.at("penalty_order").get<int>();
        fc.update_lambda = f.at("update_lambda").get<bool>();
        for (const json& jt : doc.at("trees")) {
            std::vector<VineEdge> tree;
            std::vector<EdgeFit> fits;
            for (const json& je : jt) {
                VineEdge e{je.at("a").get<int>(), je.at("b").get<int>(),
                           je.at("cond").get<std::vector<int>>(), je.at("left").get<int>(),
                           je.at("right").get<int>()};
                EdgeFit ef;
                ef.partial = fit_from(je.at("partial"));
                if (je.contains("conditional"))
                    ef.conditional = fit_from(je.at("conditional"));
                if (je.contains("reduction"))
                    ef.reduction = reduction_from(je.at("reduction"));
                if (je.contains("test"))
                    ef.test = test_from(je.at("test"));
                if (ef.conditional.has_value() != ef.reduction.has_value() ||
                    (je.at("flag") == "conditional") != ef.conditional.has_value())
                    throw std::invalid_argument("model: conditional edge without reduction");
                if (ef.reduction && ef.reduction->columns() != static_cast<int>(e.cond.size()))
                    throw std::invalid_argument("model: reduction does not match the conditioning set");
                tree.push_back(std::move(e));
                fits.push_back(std::move(ef));
            }
            fv.structure.trees.push_back(std::move(tree));
            fv.edges.push_back(std::move(fits));
        }
        if (!fv.structure.is_valid())
            throw std::invalid_argument("model: invalid vine structure");
        fv.mode = implied_estimator(fv);
        return fv;
    } catch (const json::exception& ex) {
        throw std::invalid_argument(std::string("model: malformed document: ") + ex.what());
    }
}

}  // namespace ncvine
