#pragma once

// Closed-form and semi-analytic objects of the reduced mean-reverting model:
// boundary classification from the bounds of phi, the Laplace-transform PDE
//   dU/dt + x (phi(t) + 2x) dU/dx + m_lambda x phi(t) U = 0
// solved along backward characteristics, and the stationary Gamma fixed point
// coupled through phi(alpha) = phi*.

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mfbesq/csv.hpp"
#include "mfbesq/errors.hpp"
#include "mfbesq/measures.hpp"
#include "mfbesq/model.hpp"

namespace mfbesq {

enum class BoundaryClass {
    TransientNeverHitsZero,
    Recurrent,
    HitsZeroNullLocalTime,
    ReflectingWithLocalTime,
    Indeterminate,
};

inline const char* to_string(BoundaryClass c) {
    switch (c) {
        case BoundaryClass::TransientNeverHitsZero: return "TransientNeverHitsZero";
        case BoundaryClass::Recurrent: return "Recurrent";
        case BoundaryClass::HitsZeroNullLocalTime: return "HitsZeroNullLocalTime";
        case BoundaryClass::ReflectingWithLocalTime: return "ReflectingWithLocalTime";
        case BoundaryClass::Indeterminate: return "Indeterminate";
    }
    return "?";
}

// The tested inequalities, kept alongside the class. The classification
// assumes the initial law is a point mass at x0 = m_lambda > 0.
struct BoundaryClassification {
    BoundaryClass cls = BoundaryClass::Indeterminate;
    double product_inf = 0.0;       // m_lambda * inf phi
    double product_sup = 0.0;       // m_lambda * sup phi
    bool transient = false;         // product_inf > 2
    bool recurrent = false;         // product_sup <= 2
    bool never_hits_zero = false;   // product_inf >= 2
    bool hits_zero_null_lt = false; // product_inf > 1 and product_sup < 2
    bool reflecting = false;        // product_inf > 0 and product_sup <= 1
};

inline BoundaryClassification classify_boundary(double m_lambda, double phi_inf,
                                                double phi_sup) {
    if (!(m_lambda > 0.0))
        throw std::invalid_argument("classify_boundary: m_lambda must be positive");
    if (!(phi_inf >= 0.0) || phi_inf > phi_sup)
        throw std::invalid_argument("classify_boundary: need 0 <= phi_inf <= phi_sup");

    BoundaryClassification r;
    r.product_inf = m_lambda * phi_inf;
    r.product_sup = m_lambda * phi_sup;
    r.transient = r.product_inf > 2.0;
    r.recurrent = r.product_sup <= 2.0;
    r.never_hits_zero = r.product_inf >= 2.0;
    r.hits_zero_null_lt = r.product_inf > 1.0 && r.product_sup < 2.0;
    r.reflecting = r.product_inf > 0.0 && r.product_sup <= 1.0;

    if (r.transient) r.cls = BoundaryClass::TransientNeverHitsZero;
    else if (r.never_hits_zero)
        r.cls = r.recurrent ? BoundaryClass::Recurrent : BoundaryClass::Indeterminate;
    else if (r.hits_zero_null_lt) r.cls = BoundaryClass::HitsZeroNullLocalTime;
    else if (r.reflecting) r.cls = BoundaryClass::ReflectingWithLocalTime;
    else r.cls = BoundaryClass::Indeterminate;
    return r;
}

// Laplace transform of the Gamma law: u(x) = (1 + scale x)^(-shape).
inline double gamma_laplace(const GammaParams& p, double x) {
    if (!(x >= 0.0)) throw std::invalid_argument("gamma_laplace: need x >= 0");
    return std::pow(1.0 + p.scale * x, -p.shape);
}

// Solves the transform PDE at one point (t, x) by integrating the
// characteristic y' = y (phi + 2y) backward from (t, x) to time 0 with RK4
// (step dt_char) while accumulating int phi y ds, then
//   U(t,x) = u0(y(0)) * exp(-m_lambda * int_0^t phi(s) y(s) ds).
// Backward in time the characteristic contracts toward 0, so no blow-up.
// phi is a path sampled on a uniform grid with spacing grid_dt.
inline double laplace_pde_solve(const std::vector<double>& phi_path, double grid_dt,
                                double m_lambda,
                                const std::function<double(double)>& u0, double t,
                                double x, double dt_char = 1e-4) {
    if (!(x >= 0.0)) throw std::invalid_argument("laplace_pde_solve: need x >= 0");
    if (!(t >= 0.0)) throw std::invalid_argument("laplace_pde_solve: need t >= 0");
    const double horizon = grid_dt * static_cast<double>(phi_path.size() - 1);
    if (t > horizon * (1.0 + 1e-12))
        throw std::invalid_argument("laplace_pde_solve: t outside the phi grid");
    if (t == 0.0 || x == 0.0) return t == 0.0 ? u0(x) : 1.0;

    const auto phi_at = [&](double s) {
        if (s <= 0.0) return phi_path.front();
        if (s >= horizon) return phi_path.back();
        const double pos = s / grid_dt;
        const auto k = static_cast<std::size_t>(pos);
        const double w = pos - static_cast<double>(k);
        return (1.0 - w) * phi_path[k] + w * phi_path[k + 1];
    };

    // State (y, I) in the reversed clock tau = t - s:
    //   dy/dtau = -y (phi(t - tau) + 2 y),   dI/dtau = phi(t - tau) * y.
    const auto steps = static_cast<std::size_t>(std::ceil(t / dt_char));
    const double h = t / static_cast<double>(steps);
    double y = x, integral = 0.0;
    const auto f = [&](double tau, double yy, double& dy, double& di) {
        const double p = phi_at(t - tau);
        dy = -yy * (p + 2.0 * yy);
        di = p * yy;
    };
    for (std::size_t k = 0; k < steps; ++k) {
        const double tau = h * static_cast<double>(k);
        double k1y, k1i, k2y, k2i, k3y, k3i, k4y, k4i;
        f(tau, y, k1y, k1i);
        f(tau + 0.5 * h, y + 0.5 * h * k1y, k2y, k2i);
        f(tau + 0.5 * h, y + 0.5 * h * k2y, k3y, k3i);
        f(tau + h, y + h * k3y, k4y, k4i);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        integral += h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
        if (!(y >= 0.0) || !std::isfinite(y))
            throw NumericalError("laplace_pde_solve: characteristic left [0,inf)");
    }
    const double u = u0(y) * std::exp(-m_lambda * integral);
    if (!std::isfinite(u)) throw NumericalError("laplace_pde_solve: non-finite value");
    return u;
}

struct FixedPointResult {
    double phi_star = 0.0;
    GammaParams stationary;
    std::size_t iterations = 0;
};

// Damped fixed-point iteration for the stationary coupling phi(alpha) = phi*:
// alpha_k is the Gamma law with scale 2/phi_k and shape phi_k m_lambda / 2,
// evaluated on a deterministic quantile discretization. Requires a recurrent
// regime (m_lambda * sup phi <= 2) and strictly positive phi on the iterates.
// The Gamma mean is m_lambda for every candidate, exactly.
inline FixedPointResult stationary_fixed_point(const PhiSpec& phi, double m_lambda,
                                               double tol, std::size_t max_iter,
                                               double damping = 0.5,
                                               std::size_t quantile_points = 4096) {
    if (!(m_lambda > 0.0))
        throw std::invalid_argument("stationary_fixed_point: m_lambda must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("stationary_fixed_point: tol > 0");
    if (!(m_lambda * phi.hi() <= 2.0))
        throw AssumptionError(
            "stationary_fixed_point: non-recurrent regime (m_lambda * sup phi > 2)");
    if (!(phi.lo() > 0.0))
        throw AssumptionError(
            "stationary_fixed_point: need inf phi > 0 for a Gamma stationary law");

    double phi_k = 0.5 * (phi.lo() + phi.hi());
    for (std::size_t iter = 1; iter <= max_iter; ++iter) {
        const GammaParams candidate(2.0 / phi_k, 0.5 * phi_k * m_lambda);
        const double phi_eval =
            phi.eval(EmpiricalMeasure::from_gamma_quantiles(candidate, quantile_points));
        const double phi_next = (1.0 - damping) * phi_k + damping * phi_eval;
        const double residual = std::fabs(phi_next - phi_k);
        phi_k = phi_next;
        if (residual < tol) {
            if (!(phi_k > 0.0))
                throw NumericalError("stationary_fixed_point: iteration left (0,inf)");
            return {phi_k, GammaParams(2.0 / phi_k, 0.5 * phi_k * m_lambda), iter};
        }
    }
    throw NumericalError("stationary_fixed_point: max_iter exceeded, last phi = " +
                         fmt9(phi_k));
}

// Probe grid of transform values with an optional Monte Carlo column.
struct LaplaceGrid {
    std::vector<double> ts;
    std::vector<double> xs;
    std::vector<double> u_pde; // row-major over (t, x)
    std::vector<double> u_mc;
    std::vector<double> abs_err;
};

inline void write_laplace_grid_csv(std::ostream& os, const LaplaceGrid& grid) {
    os << "t,x,U_pde,U_mc,abs_err\n";
    std::size_t idx = 0;
    for (double t : grid.ts)
        for (double x : grid.xs) {
            const double row[5] = {t, x, grid.u_pde[idx],
                                   grid.u_mc.empty() ? 0.0 : grid.u_mc[idx],
                                   grid.abs_err.empty() ? 0.0 : grid.abs_err[idx]};
            csv_row(os, row, 5);
            ++idx;
        }
}

} // namespace mfbesq
