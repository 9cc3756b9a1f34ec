#pragma once

#include "ncvine/fit.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace ncvine {

/// Argument of a pair-copula density; `w` is the conditioning value and
/// must be present exactly when the fit is conditional.
struct EvalPoint {
    double u = 0.5;
    double v = 0.5;
    std::optional<double> w;
};

/// Which copula argument an h-function integrates over.
/// First:  h(u | v) = int_0^u c(s, v) ds
/// Second: h(v | u) = int_0^v c(u, s) ds
enum class HAxis { First, Second };

double density_eval(const CopulaFit& fit, const EvalPoint& point);

/// Densities at the rows of an n x q matrix (clipped at 0).
Eigen::VectorXd density_values(const CopulaFit& fit, const Eigen::MatrixXd& points);

/// Conditional cdf of the `axis` argument at `target` given the other
/// argument `given` (and `w` for conditional fits).
double h_function(const CopulaFit& fit, double target, double given, std::optional<double> w = {},
                  HAxis axis = HAxis::First);

/// Vectorized h-function; `w` is empty for unconditional fits.
Eigen::VectorXd h_function(const CopulaFit& fit, const Eigen::VectorXd& target,
                           const Eigen::VectorXd& given, const Eigen::VectorXd& w,
                           HAxis axis = HAxis::First);

double h_inverse(const CopulaFit& fit, double prob, double given, std::optional<double> w = {},
                 HAxis axis = HAxis::First);

/// Number of h-function evaluations that clipped a negative knot value.
std::uint64_t h_clip_events();
void reset_h_clip_events();

}  // namespace ncvine
