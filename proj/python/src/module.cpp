#include "ncvine/basis.hpp"
#include "ncvine/copula.hpp"
#include "ncvine/dgp.hpp"
#include "ncvine/experiment.hpp"
#include "ncvine/metrics.hpp"
#include "ncvine/satest.hpp"
#include "ncvine/vine.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ncvine;

namespace {

VineConfig make_config(int d, int D2, int D3, double alpha, int groups, int threads) {
    VineConfig c;
    c.spec2 = {d, D2, 2};
    c.spec3 = {d, D3, 3};
    c.alpha = alpha;
    c.sa_groups = groups;
    c.threads = threads;
    c.validate();
    return c;
}

py::dict test_dict(const SaTestResult& t) {
    py::dict d;
    d["statistic"] = t.statistic;
    d["pvalue"] = t.pvalue;
    d["df"] = t.df;
    d["reject"] = t.reject;
    d["alpha"] = t.alpha;
    d["group_tau"] = t.groups.tau;
    d["group_quadrant"] = t.groups.quadrant;
    d["group_sizes"] = t.groups.sizes;
    return d;
}

py::list edge_summaries(const FittedVine& fv) {
    py::list out;
    for (std::size_t t = 0; t < fv.edges.size(); ++t)
        for (std::size_t k = 0; k < fv.edges[t].size(); ++k) {
            const VineEdge& e = fv.structure.trees[t][k];
            const EdgeFit& f = fv.edges[t][k];
            py::dict d;
            d["tree"] = t + 1;
            d["a"] = e.a;
            d["b"] = e.b;
            d["cond"] = e.cond;
            d["conditional"] = f.is_conditional();
            d["caic"] = f.active().caic;
            d["df"] = f.active().df;
            d["loglik"] = f.active().loglik;
            d["partial_caic"] = f.partial.caic;
            if (f.test)
                d["test"] = test_dict(*f.test);
            else
                d["test"] = py::none();
            out.append(d);
        }
    return out;
}

}  // namespace

PYBIND11_MODULE(_ncvine, m) {
    m.doc() = "Nonparametric conditional vine copulas";
    m.attr("__version__") = version();

    m.def("sparse_basis_size", [](int d, int D, int q) { return sparse_basis_size({d, D, q}); },
          py::arg("d"), py::arg("D"), py::arg("q"));

    py::class_<CopulaFit>(m, "CopulaFit")
        .def_property_readonly("d", [](const CopulaFit& f) { return f.spec.d; })
        .def_property_readonly("D", [](const CopulaFit& f) { return f.spec.D; })
        .def_property_readonly("q", [](const CopulaFit& f) { return f.spec.q; })
        .def_readonly("coeffs", &CopulaFit::coeffs)
        .def_readonly("lambda_", &CopulaFit::lambda)
        .def_readonly("loglik", &CopulaFit::loglik)
        .def_readonly("df", &CopulaFit::df)
        .def_readonly("caic", &CopulaFit::caic)
        .def_readonly("n", &CopulaFit::n)
        .def_readonly("converged", &CopulaFit::converged)
        .def("density", [](const CopulaFit& f, const Eigen::MatrixXd& pts) { return density_values(f, pts); },
             py::arg("points"))
        .def(
            "h",
            [](const CopulaFit& f, const Eigen::VectorXd& target, const Eigen::VectorXd& given,
               std::optional<Eigen::VectorXd> w, bool first) {
                return h_function(f, target, given, w.value_or(Eigen::VectorXd()),
                                  first ? HAxis::First : HAxis::Second);
            },
            py::arg("target"), py::arg("given"), py::arg("w") = py::none(), py::arg("first") = true);

    m.def(
        "fit_copula",
        [](const Eigen::MatrixXd& U, int d, int D) {
            py::gil_scoped_release release;
            return fit_copula_density(U, {d, D, static_cast<int>(U.cols())});
        },
        py::arg("pseudo_obs"), py::arg("d") = 2, py::arg("D") = 4);

    py::class_<FittedVine>(m, "FittedVine")
        .def_property_readonly("p", [](const FittedVine& fv) { return fv.structure.p; })
        .def_readonly("n", &FittedVine::n)
        .def_property_readonly("estimator", [](const FittedVine& fv) { return to_string(fv.mode); })
        .def_property_readonly("loglik", &FittedVine::loglik)
        .def_property_readonly("edges", &edge_summaries)
        .def("log_density",
             [](const FittedVine& fv, const Eigen::MatrixXd& pts) { return vine_log_density(fv, pts); },
             py::arg("points"))
        .def("to_json", &to_json)
        .def_static("from_json", &fitted_vine_from_json, py::arg("text"));

    m.def(
        "fit_vine",
        [](const Eigen::MatrixXd& U, const std::string& estimator, int d, int D2, int D3, double alpha,
           int groups, int threads) {
            const VineConfig cfg = make_config(d, D2, D3, alpha, groups, threads);
            const Estimator e = parse_estimator(estimator);
            py::gil_scoped_release release;
            return fit_vine(U, e, cfg);
        },
        py::arg("pseudo_obs"), py::arg("estimator") = "Test", py::arg("d") = 2, py::arg("D2") = 4,
        py::arg("D3") = 6, py::arg("alpha") = 0.05, py::arg("groups") = 2, py::arg("threads") = 1);

    m.def(
        "simulate",
        [](const std::string& dgp, int n, std::uint64_t seed, std::uint64_t stream) {
            return DgpSpec::parse(dgp).simulate(n, seed, stream);
        },
        py::arg("dgp"), py::arg("n"), py::arg("seed") = 1, py::arg("stream") = 0);
    m.def(
        "dgp_log_density",
        [](const std::string& dgp, const Eigen::MatrixXd& pts) { return dgp_log_density(DgpSpec::parse(dgp), pts); },
        py::arg("dgp"), py::arg("points"));

    m.def(
        "test_simplifying",
        [](const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& cond, double alpha,
           int groups) { return test_dict(test_simplifying(u, v, cond, alpha, groups)); },
        py::arg("u"), py::arg("v"), py::arg("cond"), py::arg("alpha") = 0.05, py::arg("groups") = 2);

    m.def(
        "kl_oos",
        [](const Eigen::VectorXd& log_true, const Eigen::VectorXd& log_fit, bool exclude_nonfinite) {
            return kl_oos(log_true, log_fit, exclude_nonfinite).value;
        },
        py::arg("log_true"), py::arg("log_fit"), py::arg("exclude_nonfinite") = false);
    m.def(
        "posterior_prob",
        [](double logf0, double logf1, double pi0) { return posterior_prob(logf0, logf1, pi0); },
        py::arg("logf0"), py::arg("logf1"), py::arg("pi0") = 0.5);
    m.def(
        "roc",
        [](const Eigen::VectorXd& post, const Eigen::VectorXi& labels) {
            const auto pts = roc_points(post, labels);
            Eigen::MatrixXd out(static_cast<Eigen::Index>(pts.size()), 3);
            for (std::size_t i = 0; i < pts.size(); ++i)
                out.row(static_cast<Eigen::Index>(i)) << pts[i].alpha, pts[i].fpr, pts[i].tpr;
            return py::make_tuple(out, roc_auc(pts));
        },
        py::arg("posteriors"), py::arg("labels"));

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const std::domain_error& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });
}
