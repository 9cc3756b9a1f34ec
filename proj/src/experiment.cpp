#include "ncvine/experiment.hpp"

#include <cstdio>
#include <future>
#include <sstream>
#include <stdexcept>

#ifndef NCVINE_VERSION
#define NCVINE_VERSION "unknown"
#endif

namespace ncvine {

const char* version() {
    return NCVINE_VERSION;
}

void ExperimentConfig::validate() const {
    if (dgp.empty() == data.empty())
        throw std::invalid_argument("experiment: give exactly one of a DGP spec or a data file");
    if (estimators.empty())
        throw std::invalid_argument("experiment: no estimator selected");
    if (n < 2 || n_eval < 0 || reps < 1 || threads < 1)
        throw std::invalid_argument("experiment: n >= 2, reps >= 1 and threads >= 1 required");
    vine_config().validate();
}

VineConfig ExperimentConfig::vine_config() const {
    VineConfig v;
    v.spec2 = {d, D2, 2};
    v.spec3 = {d, D3, 3};
    v.alpha = alpha;
    v.sa_groups = groups;
    return v;
}

std::vector<Estimator> parse_estimators(const std::string& text) {
    if (text == "all")
        return {Estimator::SimpA, Estimator::Cond, Estimator::Test};
    std::vector<Estimator> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const Estimator e = parse_estimator(item);
        for (Estimator o : out)
            if (o == e)
                throw std::invalid_argument("estimator '" + item + "' listed twice");
        out.push_back(e);
    }
    if (out.empty())
        throw std::invalid_argument("no estimator given");
    return out;
}

ReplicateSample simulate_replicate(const DgpSpec& dgp, int n, int n_eval, std::uint64_t seed, int rep) {
    const auto r = static_cast<std::uint64_t>(rep);
    return {dgp.simulate(n, seed, 2 * r), dgp.simulate(n_eval, seed, 2 * r + 1)};
}

Eigen::VectorXd dgp_log_density(const DgpSpec& dgp, const Eigen::MatrixXd& points) {
    Eigen::VectorXd out(points.rows());
    std::vector<double> row(points.cols());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (Eigen::Index j = 0; j < points.cols(); ++j)
            row[j] = points(i, j);
        out[i] = dgp.log_density(row);
    }
    return out;
}

EvalReport evaluate_model(const FittedVine& fv, const Eigen::MatrixXd& eval,
                          const Eigen::VectorXd& log_true, const std::string& model_id, int rep) {
    EvalReport r;
    r.model_id = model_id;
    r.replicate = rep;
    r.n_eval = static_cast<int>(eval.rows());
    const Eigen::VectorXd lf = vine_log_density(fv, eval);
    r.mean_loglik = lf.mean();
    if (log_true.size() > 0) {
        const KlResult k = kl_oos(log_true, lf, true);
        r.has_kl = true;
        r.kl = k.value;
        r.n_nonfinite = k.n_nonfinite;
    }
    return r;
}

ReplicateResult run_replicate(const ExperimentConfig& cfg, const DgpSpec& dgp, int rep) {
    const ReplicateSample s = simulate_replicate(dgp, cfg.n, cfg.eval_size(), cfg.seed, rep);
    const Eigen::VectorXd lt = dgp_log_density(dgp, s.eval);
    const VineConfig vc = cfg.vine_config();
    ReplicateResult res;
    res.replicate = rep;
    for (Estimator e : cfg.estimators) {
        res.fits.push_back(fit_vine(s.train, e, vc));
        res.reports.push_back(evaluate_model(res.fits.back(), s.eval, lt, to_string(e), rep));
    }
    return res;
}

std::vector<ReplicateResult> run_study(const ExperimentConfig& cfg, const DgpSpec& dgp) {
    std::vector<ReplicateResult> out;
    for (int start = 0; start < cfg.reps; start += cfg.threads) {
        std::vector<std::future<ReplicateResult>> jobs;
        for (int r = start; r < std::min(cfg.reps, start + cfg.threads); ++r)
            jobs.push_back(std::async(cfg.threads > 1 ? std::launch::async : std::launch::deferred,
                                      [&cfg, &dgp, r] { return run_replicate(cfg, dgp, r); }));
        for (auto& j : jobs)
            out.push_back(j.get());
    }
    return out;
}

namespace {

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string reports_csv(const std::vector<EvalReport>& reports) {
    bool kl = false;
    for (const auto& r : reports)
        kl = kl || r.has_kl;
    std::string out = kl ? "replicate,estimator,n_eval,oos_loglik,kl\n" : "replicate,estimator,n_eval,oos_loglik\n";
    for (const auto& r : reports) {
        out += std::to_string(r.replicate) + "," + r.model_id + "," + std::to_string(r.n_eval) + "," +
               num(r.mean_loglik);
        if (kl)
            out += "," + (r.has_kl ? num(r.kl) : std::string("nan"));
        out += '\n';
    }
    return out;
}

std::string edge_report_csv(const FittedVine& fv, const std::string& estimator) {
    std::string out =
        "estimator,tree,a,b,cond,flag,caic,df,lambda,loglik,partial_caic,partial_loglik,"
        "sa_statistic,sa_pvalue,sa_reject\n";
    for (std::size_t t = 0; t < fv.edges.size(); ++t)
        for (std::size_t k = 0; k < fv.edges[t].size(); ++k) {
            const VineEdge& e = fv.structure.trees[t][k];
            const EdgeFit& f = fv.edges[t][k];
            std::string cond;
            for (std::size_t c = 0; c < e.cond.size(); ++c)
                cond += (c ? ";" : "") + std::to_string(e.cond[c] + 1);
            const CopulaFit& a = f.active();
            out += estimator + "," + std::to_string(t + 1) + "," + std::to_string(e.a + 1) + "," +
                   std::to_string(e.b + 1) + "," + cond + "," +
                   (f.is_conditional() ? "conditional" : "partial") + "," + num(a.caic) + "," +
                   num(a.df) + "," + num(a.lambda) + "," + num(a.loglik) + "," +
                   num(f.partial.caic) + "," + num(f.partial.loglik) + ",";
            if (f.test)
                out += num(f.test->statistic) + "," + num(f.test->pvalue) + "," +
                       (f.test->reject ? "1" : "0");
            else
                out += ",,";
            out += '\n';
        }
    return out;
}

}  // namespace ncvine
