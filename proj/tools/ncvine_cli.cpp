// ncvine: simulate | fit | evaluate | satest
#include "ncvine/experiment.hpp"
#include "ncvine/io.hpp"
#include "ncvine/metrics.hpp"
#include "ncvine/satest.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>

using namespace ncvine;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Options {
    ExperimentConfig cfg;
    std::string estimator = "all";
    std::vector<std::string> models;
    std::string labels;
    std::string models_dir;
};

json config_json(const Options& o) {
    const ExperimentConfig& c = o.cfg;
    return {{"dgp", c.dgp},    {"data", c.data},     {"ranks", c.ranks},   {"estimator", o.estimator},
            {"d", c.d},        {"D2", c.D2},         {"D3", c.D3},         {"n", c.n},
            {"n_eval", c.eval_size()}, {"reps", c.reps}, {"seed", c.seed}, {"alpha", c.alpha},
            {"groups", c.groups}, {"threads", c.threads}, {"out", c.out}};
}

struct Manifest {
    json doc;
    std::vector<std::string> outputs;

    Manifest(const std::string& command, const Options& o, int argc, char** argv) {
        doc = {{"tool", "ncvine"}, {"version", version()}, {"command", command}, {"config", config_json(o)},
               {"argv", std::vector<std::string>(argv, argv + argc)}};
        if (!o.cfg.dgp.empty()) {
            json reps = json::array();
            for (int r = 0; r < o.cfg.reps; ++r)
                reps.push_back({{"replicate", r}, {"train_stream", 2 * r}, {"eval_stream", 2 * r + 1}});
            doc["rng"] = {{"generator", "philox4x32-10"}, {"seed", o.cfg.seed}, {"replicates", reps}};
        }
    }
    void write(const std::string& path, const std::string& content) {
        write_file_atomic(path, content);
        outputs.push_back(path);
    }
    void finish(const std::string& dir) {
        doc["outputs"] = outputs;
        write_file_atomic((fs::path(dir) / "manifest.json").string(), doc.dump(2) + "\n");
    }
};

std::string path_in(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::string rep_dir(const std::string& out, int r) {
    return path_in(out, "rep" + std::to_string(r));
}

Eigen::MatrixXd load_pseudo_obs(const std::string& path, bool ranks) {
    const CsvTable t = read_csv(path);
    if (t.data.rows() == 0)
        throw std::invalid_argument(path + ": no data rows");
    if (ranks)
        return rank_transform(t.data);
    if (t.data.minCoeff() < 0.0 || t.data.maxCoeff() > 1.0)
        throw std::invalid_argument(path + ": values outside [0,1]; use --ranks for raw data");
    return t.data;
}

json fit_summary(const FittedVine& fv, Estimator e) {
    json edges = json::array();
    for (std::size_t t = 0; t < fv.edges.size(); ++t)
        for (std::size_t k = 0; k < fv.edges[t].size(); ++k) {
            const VineEdge& ed = fv.structure.trees[t][k];
            const EdgeFit& f = fv.edges[t][k];
            json j = {{"tree", t + 1},
                      {"pair", {ed.a + 1, ed.b + 1}},
                      {"cond", ed.cond},
                      {"flag", f.is_conditional() ? "conditional" : "partial"},
                      {"caic", f.active().caic},
                      {"df", f.active().df},
                      {"lambda", f.active().lambda},
                      {"loglik", f.active().loglik}};
            for (auto& c : j["cond"])
                c = c.get<int>() + 1;
            if (f.test)
                j["sa_test"] = {{"statistic", f.test->statistic},
                                {"pvalue", f.test->pvalue},
                                {"reject", f.test->reject}};
            edges.push_back(j);
        }
    return {{"estimator", to_string(e)}, {"loglik", fv.loglik()}, {"edges", edges}};
}

int run_simulate(const Options& o, int argc, char** argv) {
    if (o.cfg.dgp.empty())
        throw std::invalid_argument("simulate needs --dgp");
    const DgpSpec dgp = DgpSpec::parse(o.cfg.dgp);
    Manifest m("simulate", o, argc, argv);
    m.doc["dgp"] = dgp.to_string();
    for (int r = 0; r < o.cfg.reps; ++r) {
        const ReplicateSample s = simulate_replicate(dgp, o.cfg.n, o.cfg.eval_size(), o.cfg.seed, r);
        m.write(path_in(o.cfg.out, "train_rep" + std::to_string(r) + ".csv"), format_csv(s.train, {}));
        m.write(path_in(o.cfg.out, "eval_rep" + std::to_string(r) + ".csv"), format_csv(s.eval, {}));
    }
    m.finish(o.cfg.out);
    return 0;
}

void fit_one_sample(const Eigen::MatrixXd& U, const ExperimentConfig& cfg, const std::string& dir,
                    Manifest& m, json& report) {
    std::string edges;
    for (Estimator e : cfg.estimators) {
        const FittedVine fv = fit_vine(U, e, cfg.vine_config());
        m.write(path_in(dir, "model_" + to_string(e) + ".json"), to_json(fv) + "\n");
        const std::string rows = edge_report_csv(fv, to_string(e));
        edges += edges.empty() ? rows : rows.substr(rows.find('\n') + 1);
        report.push_back(fit_summary(fv, e));
    }
    m.write(path_in(dir, "edges.csv"), edges);
}

int run_fit(const Options& o, int argc, char** argv) {
    o.cfg.validate();
    Manifest m("fit", o, argc, argv);
    json report = json::array();
    if (!o.cfg.data.empty()) {
        const Eigen::MatrixXd U = load_pseudo_obs(o.cfg.data, o.cfg.ranks);
        json r = json::array();
        fit_one_sample(U, o.cfg, o.cfg.out, m, r);
        report = {{"n", U.rows()}, {"p", U.cols()}, {"fits", r}};
    } else {
        const DgpSpec dgp = DgpSpec::parse(o.cfg.dgp);
        m.doc["dgp"] = dgp.to_string();
        for (int rep = 0; rep < o.cfg.reps; ++rep) {
            const Eigen::MatrixXd U = simulate_replicate(dgp, o.cfg.n, 1, o.cfg.seed, rep).train;
            json r = json::array();
            fit_one_sample(U, o.cfg, rep_dir(o.cfg.out, rep), m, r);
            report.push_back({{"replicate", rep}, {"fits", r}});
        }
    }
    m.write(path_in(o.cfg.out, "fit_report.json"), report.dump(2) + "\n");
    m.finish(o.cfg.out);
    return 0;
}

int run_evaluate(const Options& o, int argc, char** argv) {
    Manifest m("evaluate", o, argc, argv);
    std::vector<EvalReport> reports;
    if (!o.cfg.data.empty()) {
        if (o.models.empty())
            throw std::invalid_argument("evaluate --data needs at least one --model");
        const Eigen::MatrixXd X = load_pseudo_obs(o.cfg.data, o.cfg.ranks);
        Eigen::VectorXd lt;
        if (!o.cfg.dgp.empty()) {
            const DgpSpec dgp = DgpSpec::parse(o.cfg.dgp);
            if (dgp.dim() != X.cols())
                throw std::invalid_argument("evaluate: DGP dimension does not match the data");
            lt = dgp_log_density(dgp, X);
            m.doc["dgp"] = dgp.to_string();
        }
        std::vector<Eigen::VectorXd> logs;
        for (const auto& path : o.models) {
            const FittedVine fv = fitted_vine_from_json(read_file(path));
            if (fv.structure.p != X.cols())
                throw std::invalid_argument("evaluate: model " + path + " has dimension " +
                                            std::to_string(fv.structure.p) + ", data has " +
                                            std::to_string(X.cols()));
            std::string id = fs::path(path).stem().string();
            if (id.rfind("model_", 0) == 0)
                id = id.substr(6);
            reports.push_back(evaluate_model(fv, X, lt, id, 0));
            logs.push_back(vine_log_density(fv, X));
        }
        if (!o.labels.empty()) {
            if (logs.size() != 2)
                throw std::invalid_argument("evaluate --labels needs exactly two --model files");
            const CsvTable lab = read_csv(o.labels);
            if (lab.data.cols() != 1 || lab.data.rows() != X.rows())
                throw std::invalid_argument(o.labels + ": expected one label column with one row per observation");
            Eigen::VectorXd post(X.rows());
            const Eigen::VectorXi y = lab.data.col(0).cast<int>();
            for (Eigen::Index i = 0; i < X.rows(); ++i)
                post[i] = posterior_prob(logs[0][i], logs[1][i], 0.5);
            const auto roc = roc_points(post, y);
            Eigen::MatrixXd table(static_cast<Eigen::Index>(roc.size()), 3);
            for (std::size_t k = 0; k < roc.size(); ++k)
                table.row(static_cast<Eigen::Index>(k)) << roc[k].alpha, roc[k].fpr, roc[k].tpr;
            m.write(path_in(o.cfg.out, "roc.csv"), format_csv(table, {"alpha", "fpr", "tpr"}));
            m.doc["auc"] = roc_auc(roc);
        }
    } else {
        if (o.cfg.dgp.empty())
            throw std::invalid_argument("evaluate needs --data or --dgp");
        const DgpSpec dgp = DgpSpec::parse(o.cfg.dgp);
        m.doc["dgp"] = dgp.to_string();
        const std::string dir = o.models_dir.empty() ? o.cfg.out : o.models_dir;
        for (int rep = 0; rep < o.cfg.reps; ++rep) {
            const Eigen::MatrixXd X = simulate_replicate(dgp, 1, o.cfg.eval_size(), o.cfg.seed, rep).eval;
            const Eigen::VectorXd lt = dgp_log_density(dgp, X);
            for (Estimator e : o.cfg.estimators) {
                const std::string path = path_in(rep_dir(dir, rep), "model_" + to_string(e) + ".json");
                const FittedVine fv = fitted_vine_from_json(read_file(path));
                reports.push_back(evaluate_model(fv, X, lt, to_string(e), rep));
            }
        }
    }
    m.write(path_in(o.cfg.out, "eval_report.csv"), reports_csv(reports));
    m.finish(o.cfg.out);
    std::cout << reports_csv(reports);
    return 0;
}

int run_satest(const Options& o, int argc, char** argv) {
    Manifest m("satest", o, argc, argv);
    if (!o.cfg.data.empty()) {
        const Eigen::MatrixXd X = load_pseudo_obs(o.cfg.data, o.cfg.ranks);
        if (X.cols() != 3)
            throw std::invalid_argument("satest --data expects three columns: u, v, cond");
        const SaTestResult r = test_simplifying(X.col(0), X.col(1), X.col(2), o.cfg.alpha, o.cfg.groups);
        const json j = {{"statistic", r.statistic}, {"pvalue", r.pvalue}, {"df", r.df},
                        {"reject", r.reject},       {"alpha", r.alpha},   {"group_sizes", r.groups.sizes},
                        {"group_tau", r.groups.tau}, {"group_quadrant", r.groups.quadrant}};
        m.write(path_in(o.cfg.out, "satest.json"), j.dump(2) + "\n");
        std::cout << j.dump(2) << "\n";
    } else {
        if (o.cfg.dgp.empty())
            throw std::invalid_argument("satest needs --data or --dgp");
        const DgpSpec dgp = DgpSpec::parse(o.cfg.dgp);
        m.doc["dgp"] = dgp.to_string();
        VineConfig vc = o.cfg.vine_config();
        std::string csv = "replicate,tree,a,b,cond,statistic,pvalue,reject\n";
        std::vector<int> rejections(dgp.dim(), 0), tests(dgp.dim(), 0);
        for (int rep = 0; rep < o.cfg.reps; ++rep) {
            const Eigen::MatrixXd U = simulate_replicate(dgp, o.cfg.n, 1, o.cfg.seed, rep).train;
            const FittedVine fv = fit_vine(U, Estimator::SimpA, vc);
            for (std::size_t t = 1; t < fv.edges.size(); ++t)
                for (std::size_t k = 0; k < fv.edges[t].size(); ++k) {
                    const auto& f = fv.edges[t][k];
                    const auto& e = fv.structure.trees[t][k];
                    if (!f.test)
                        continue;
                    std::string cond;
                    for (std::size_t c = 0; c < e.cond.size(); ++c)
                        cond += (c ? ";" : "") + std::to_string(e.cond[c] + 1);
                    char buf[128];
                    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d", f.test->statistic, f.test->pvalue,
                                  f.test->reject ? 1 : 0);
                    csv += std::to_string(rep) + "," + std::to_string(t + 1) + "," + std::to_string(e.a + 1) +
                           "," + std::to_string(e.b + 1) + "," + cond + "," + buf + "\n";
                    ++tests[t];
                    rejections[t] += f.test->reject;
                }
        }
        json rates = json::object();
        for (std::size_t t = 1; t + 1 < rejections.size(); ++t)
            if (tests[t])
                rates["tree" + std::to_string(t + 1)] = static_cast<double>(rejections[t]) / tests[t];
        m.doc["rejection_rate"] = rates;
        m.write(path_in(o.cfg.out, "satest_report.csv"), csv);
        std::cout << rates.dump() << "\n";
    }
    m.finish(o.cfg.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-simplified vine copulas with penalized hierarchical B-splines"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* s) {
        s->add_option("--dgp", o.cfg.dgp, "DGP spec, e.g. frank:p=3,case=b,beta=0.6 or mixture:p=3");
        s->add_option("--data", o.cfg.data, "CSV with header row");
        s->add_flag("--ranks", o.cfg.ranks, "Apply standardized ranks to each column first");
        s->add_option("--estimator", o.estimator, "SimpA, Cond, Test, a comma list, or all");
        s->add_option("--d", o.cfg.d, "Degree of the univariate hierarchical basis")->check(CLI::Range(1, 4));
        s->add_option("--D2", o.cfg.D2, "Maximum cumulated level, unconditional copulas");
        s->add_option("--D3", o.cfg.D3, "Maximum cumulated level, conditional copulas");
        s->add_option("--n", o.cfg.n, "Sample size")->check(CLI::PositiveNumber);
        s->add_option("--n-eval", o.cfg.n_eval, "Evaluation sample size (default: n)");
        s->add_option("--reps", o.cfg.reps, "Replicates")->check(CLI::PositiveNumber);
        s->add_option("--seed", o.cfg.seed, "Seed of the counter-based generator");
        s->add_option("--alpha", o.cfg.alpha, "Level of the simplifying-assumption test");
        s->add_option("--groups", o.cfg.groups, "Groups of the simplifying-assumption test");
        s->add_option("--threads", o.cfg.threads, "Worker threads")->check(CLI::PositiveNumber);
        s->add_option("--out", o.cfg.out, "Output directory");
    };
    CLI::App* sim = app.add_subcommand("simulate", "Draw training and evaluation samples from a DGP");
    CLI::App* fit = app.add_subcommand("fit", "Fit vine estimators and write model files");
    CLI::App* ev = app.add_subcommand("evaluate", "Out-of-sample log-likelihood, KL and ROC");
    CLI::App* sa = app.add_subcommand("satest", "Simplifying-assumption tests");
    for (CLI::App* s : {sim, fit, ev, sa})
        common(s);
    ev->add_option("--model", o.models, "Model file (repeatable)");
    ev->add_option("--labels", o.labels, "Class labels (0/1) for ROC with two models");
    ev->add_option("--models-dir", o.models_dir, "Directory of per-replicate models (default: --out)");

    CLI11_PARSE(app, argc, argv);
    try {
        o.cfg.estimators = parse_estimators(o.estimator);
        if (sim->parsed())
            return run_simulate(o, argc, argv);
        if (fit->parsed())
            return run_fit(o, argc, argv);
        if (ev->parsed())
            return run_evaluate(o, argc, argv);
        return run_satest(o, argc, argv);
    } catch (const std::exception& ex) {
        std::cerr << "ncvine: " << ex.what() << "\n";
        return 1;
    }
}
