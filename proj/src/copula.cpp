#include "ncvine/copula.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ncvine {

namespace {

std::atomic<std::uint64_t> clip_events{0};

constexpr int kMaxK = 17;  // d <= 4 is plenty for pair copulas

struct Piece {
    double x0, x1, y0, y1;
};

// Positive part of the piecewise-linear conditional density profile along
// the target axis, with its total mass.
struct Profile {
    std::vector<Piece> pieces;
    double mass = 0.0;
};

void check_point(const CopulaFit& fit, double a, double b, std::optional<double> w) {
    if (fit.conditional() != w.has_value())
        throw std::invalid_argument(fit.conditional()
                                        ? "conditional copula needs a conditioning value"
                                        : "unconditional copula takes no conditioning value");
    auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in01(a) || !in01(b) || (w && !in01(*w)))
        throw std::domain_error("copula arguments must lie in [0,1]");
}

Profile profile(const CopulaFit& fit, double given, std::optional<double> w, HAxis axis) {
    const SparseBasisSpec& spec = fit.spec;
    const int K = spec.univariate_size();
    if (K > kMaxK)
        throw std::invalid_argument("h-function: basis degree too large");
    const auto& idx = sparse_index(spec);
    const auto knots = knot_grid(spec.d).knots;

    std::array<double, kMaxK> hg{}, hw{};
    hierarchical_basis_row(given, spec.d, std::span<double>(hg.data(), K));
    if (w)
        hierarchical_basis_row(*w, spec.d, std::span<double>(hw.data(), K));
    // hierarchical basis at the knots of the target axis
    std::vector<double> hk(static_cast<std::size_t>(K) * K);
    for (int k = 0; k < K; ++k)
        hierarchical_basis_row(knots[k], spec.d, std::span<double>(hk.data() + k * K, K));

    const int t = axis == HAxis::First ? 0 : 1;
    const int o = 1 - t;
    std::array<double, kMaxK> f{};
    for (int c = 0; c < idx.size(); ++c) {
        const auto& mi = idx.multi[c];
        double s = fit.coeffs[c] * hg[mi[o]];
        if (w)
            s *= hw[mi[2]];
        if (s == 0.0)
            continue;
        for (int k = 0; k < K; ++k)
            f[k] += s * hk[k * K + mi[t]];
    }

    Profile p;
    bool clipped = false;
    for (int k = 0; k + 1 < K; ++k) {
        const double x0 = knots[k], x1 = knots[k + 1];
        const double a = f[k], b = f[k + 1];
        clipped = clipped || a < 0.0 || b < 0.0;
        if (a >= 0.0 && b >= 0.0) {
            p.pieces.push_back({x0, x1, a, b});
        } else if (a > 0.0 || b > 0.0) {
            const double xz = x0 + a / (a - b) * (x1 - x0);
            if (a > 0.0)
                p.pieces.push_back({x0, xz, a, 0.0});
            else
                p.pieces.push_back({xz, x1, 0.0, b});
        }
    }
    if (clipped)
        clip_events.fetch_add(1, std::memory_order_relaxed);
    for (const auto& pc : p.pieces)
        p.mass += 0.5 * (pc.y0 + pc.y1) * (pc.x1 - pc.x0);
    if (!(p.mass > 0.0))
        throw std::domain_error("h-function: conditional density has no positive mass");
    return p;
}

double partial_area(const Piece& pc, double s) {
    const double L = pc.x1 - pc.x0;
    return pc.y0 * s + 0.5 * (pc.y1 - pc.y0) / L * s * s;
}

double cdf(const Profile& p, double target) {
    double acc = 0.0;
    for (const auto& pc : p.pieces) {
        if (target >= pc.x1) {
            acc += 0.5 * (pc.y0 + pc.y1) * (pc.x1 - pc.x0);
        } else {
            if (target > pc.x0)
                acc += partial_area(pc, target - pc.x0);
            break;
        }
    }
    return std::clamp(acc / p.mass, 0.0, 1.0);
}

double quantile(const Profile& p, double prob) {
    if (prob <= 0.0)
        return p.pieces.front().x0;
    if (prob >= 1.0)
        return p.pieces.back().x1;
    double remaining = prob * p.mass;
    for (const auto& pc : p.pieces) {
        const double L = pc.x1 - pc.x0;
        const double area = 0.5 * (pc.y0 + pc.y1) * L;
        if (remaining > area) {
            remaining -= area;
            continue;
        }
        // y0 s + a s^2 = remaining, a = (y1 - y0) / (2L)
        const double a = 0.5 * (pc.y1 - pc.y0) / L;
        const double disc = std::max(pc.y0 * pc.y0 + 4.0 * a * remaining, 0.0);
        const double den = pc.y0 + std::sqrt(disc);
        const double s = den > 0.0 ? 2.0 * remaining / den : 0.0;
        return std::clamp(pc.x0 + s, pc.x0, pc.x1);
    }
    return p.pieces.back().x1;
}

}  // namespace

double density_eval(const CopulaFit& fit, const EvalPoint& point) {
    check_point(fit, point.u, point.v, point.w);
    Eigen::MatrixXd m(1, fit.spec.q);
    m(0, 0) = point.u;
    m(0, 1) = point.v;
    if (point.w)
        m(0, 2) = *point.w;
    return density_values(fit, m)[0];
}

Eigen::VectorXd density_values(const CopulaFit& fit, const Eigen::MatrixXd& points) {
    if (points.cols() != fit.spec.q)
        throw std::invalid_argument("density_values: point arity does not match the fit");
    return (sparse_tensor_basis(points, fit.spec).values * fit.coeffs).cwiseMax(0.0);
}

double h_function(const CopulaFit& fit, double target, double given, std::optional<double> w,
                  HAxis axis) {
    check_point(fit, target, given, w);
    return cdf(profile(fit, given, w, axis), target);
}

Eigen::VectorXd h_function(const CopulaFit& fit, const Eigen::VectorXd& target,
                           const Eigen::VectorXd& given, const Eigen::VectorXd& w, HAxis axis) {
    if (target.size() != given.size() || (fit.conditional() && w.size() != target.size()))
        throw std::invalid_argument("h_function: length mismatch");
    Eigen::VectorXd out(target.size());
    for (Eigen::Index i = 0; i < target.size(); ++i)
        out[i] = h_function(fit, target[i], given[i],
                            fit.conditional() ? std::optional<double>(w[i]) : std::nullopt, axis);
    return out;
}

double h_inverse(const CopulaFit& fit, double prob, double given, std::optional<double> w,
                 HAxis axis) {
    check_point(fit, prob, given, w);
    return quantile(profile(fit, given, w, axis), prob);
}

std::uint64_t h_clip_events() {
    return clip_events.load();
}

void reset_h_clip_events() {
    clip_events.store(0);
}

}  // namespace ncvine
