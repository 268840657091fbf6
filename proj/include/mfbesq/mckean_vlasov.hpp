#pragma once

// Solvers for the non-local limit SDE
//   dX = [delta + (m_lambda + delta t - X) phi(L(X(t)))] dt + sqrt(X) g(X) dW
// by large-ensemble self-interaction and by Picard iteration on the law flow,
// plus the analytic first/second moment flows (variance ODE and its closed
// form) and the variance turning-point detector.

#include <cmath>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "mfbesq/csv.hpp"
#include "mfbesq/errors.hpp"
#include "mfbesq/measures.hpp"
#include "mfbesq/model.hpp"
#include "mfbesq/particles.hpp"

namespace mfbesq {

// N-sample approximation of the law flow t -> L(X(t)) on a snapshot grid,
// with the realized interaction intensity and first two moments.
struct LawPath {
    std::vector<double> grid;
    std::vector<EmpiricalMeasure> measures;
    std::vector<double> phi_path;
    std::vector<double> mean_path;
    std::vector<double> var_path;

    MeasurePath measure_path() const { return MeasurePath(grid, measures); }

    std::size_t node_at(double t) const {
        for (std::size_t k = 0; k < grid.size(); ++k)
            if (std::fabs(grid[k] - t) <= 1e-9 * (1.0 + std::fabs(t))) return k;
        throw std::invalid_argument("LawPath: requested time is not a grid node");
    }
};

namespace detail {

inline LawPath law_path_from_trajectory(const SystemTrajectory& traj) {
    LawPath law;
    law.grid = traj.grid;
    law.measures.reserve(traj.grid.size());
    law.phi_path.resize(traj.grid.size());
    law.mean_path.resize(traj.grid.size());
    law.var_path.resize(traj.grid.size());
    for (std::size_t j = 0; j < traj.grid.size(); ++j) {
        law.measures.push_back(traj.measure_at(j));
        const auto dense = static_cast<std::size_t>(std::llround(traj.grid[j] / traj.dt));
        law.phi_path[j] = traj.phi_dense[dense];
        law.mean_path[j] = traj.mean_dense[dense];
        law.var_path[j] = traj.var_dense[dense];
    }
    return law;
}

// Three-point Lagrange derivative estimates on a strictly increasing grid.
inline std::vector<double> grid_derivative(const std::vector<double>& t,
                                           const std::vector<double>& f) {
    const std::size_t m = t.size();
    std::vector<double> d(m, 0.0);
    if (m == 1) return d;
    if (m == 2) {
        d[0] = d[1] = (f[1] - f[0]) / (t[1] - t[0]);
        return d;
    }
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t j = (k == 0) ? 1 : (k == m - 1 ? m - 2 : k);
        const double t0 = t[j - 1], t1 = t[j], t2 = t[j + 1];
        const double f0 = f[j - 1], f1 = f[j], f2 = f[j + 1];
        const double x = t[k];
        d[k] = f0 * (2.0 * x - t1 - t2) / ((t0 - t1) * (t0 - t2)) +
               f1 * (2.0 * x - t0 - t2) / ((t1 - t0) * (t1 - t2)) +
               f2 * (2.0 * x - t0 - t1) / ((t2 - t0) * (t2 - t1));
    }
    return d;
}

// Running integral by derivative-corrected trapezoid (fourth order for smooth
// integrands, exact for cubics).
inline std::vector<double> cumulative_integral(const std::vector<double>& t,
                                               const std::vector<double>& f) {
    if (t.size() != f.size() || t.empty())
        throw std::invalid_argument("cumulative_integral: grid/value size mismatch");
    const std::vector<double> df = grid_derivative(t, f);
    std::vector<double> acc(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double h = t[k] - t[k - 1];
        acc[k] = acc[k - 1] + 0.5 * h * (f[k - 1] + f[k]) -
                 h * h / 12.0 * (df[k] - df[k - 1]);
    }
    return acc;
}

} // namespace detail

// Simulates N interacting particles as the sanctioned approximation of the
// limit law flow. record_stride must divide the step count.
inline LawPath solve_selfconsistent(const ModelSpec& spec, std::size_t N,
                                    const SchemeConfig& cfg, double T,
                                    std::size_t record_stride = 1) {
    if (N < 100) throw std::invalid_argument("solve_selfconsistent: need N >= 100");
    const auto steps = static_cast<std::size_t>(std::llround(T / cfg.dt));
    if (record_stride < 1 || steps % record_stride != 0)
        throw std::invalid_argument(
            "solve_selfconsistent: record_stride must divide the step count");
    return detail::law_path_from_trajectory(simulate(N, spec, cfg, T, record_stride));
}

struct PicardResult {
    LawPath law;
    std::vector<double> gaps; // sup-over-grid d1 between successive law paths
    std::size_t iterations = 0;
};

// Picard iteration on the law flow of the limit SDE. The mean flow entering
// the drift is the exact identity mean(t) = m_lambda + delta t (it solves the
// first-moment ODE for every phi), so the iteration acts on the realized phi
// path: freeze it, simulate N independent scalar diffusions with the frozen
// coefficients, re-extract phi from the sampled ensemble, repeat. Iterations
// share random streams, which makes the map deterministic and lets the
// stopping rule act on sup-over-grid d1 of successive sampled law paths.
inline PicardResult picard_iterate(const ModelSpec& spec, std::size_t N,
                                   const SchemeConfig& cfg, double T, double tol,
                                   std::size_t max_iter,
                                   std::size_t record_stride = 1) {
    if (!(tol > 0.0)) throw std::invalid_argument("picard_iterate: tol must be > 0");
    if (max_iter < 2) throw std::invalid_argument("picard_iterate: need max_iter >= 2");
    const auto steps = static_cast<std::size_t>(std::llround(T / cfg.dt));
    if (record_stride < 1 || steps % record_stride != 0)
        throw std::invalid_argument(
            "picard_iterate: record_stride must divide the step count");

    const double dt = cfg.dt;
    const double sqrt_dt = std::sqrt(dt);
    const double m_lambda = spec.m_lambda();
    const std::vector<double> init = spec.initial_law.atoms(N);
    const bool needs_measure = spec.phi.needs_full_measure();

    std::vector<double> phi_frozen(steps + 1,
                                   spec.phi.eval(EmpiricalMeasure(init)));
    std::vector<double> mean_exact(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
        mean_exact[k] = m_lambda + spec.delta * dt * static_cast<double>(k);

    PicardResult result;
    std::optional<LawPath> prev;

    for (std::size_t iter = 1; iter <= max_iter; ++iter) {
        std::vector<double> x = init;
        std::vector<Rng> streams;
        streams.reserve(N);
        for (std::size_t i = 0; i < N; ++i)
            streams.push_back(Rng::for_particle(cfg.seed, cfg.stream_id, i));

        LawPath law;
        std::vector<double> phi_next(steps + 1);
        const double inv_n = 1.0 / static_cast<double>(N);
        for (std::size_t k = 0; k <= steps; ++k) {
            double sum = 0.0, sum_sq = 0.0;
            for (double xi : x) {
                sum += xi;
                sum_sq += xi * xi;
            }
            const double mean = sum * inv_n;
            const double var = std::max(0.0, sum_sq * inv_n - mean * mean);
            phi_next[k] = needs_measure ? spec.phi.eval(EmpiricalMeasure(x))
                                        : spec.phi.eval_mean(mean);
            if (k % record_stride == 0) {
                law.grid.push_back(dt * static_cast<double>(k));
                law.measures.emplace_back(x);
                law.phi_path.push_back(phi_next[k]);
                law.mean_path.push_back(mean);
                law.var_path.push_back(var);
            }
            if (k == steps) break;
            for (std::size_t i = 0; i < N; ++i) {
                const double drift =
                    spec.delta + (mean_exact[k] - x[i]) * phi_frozen[k];
                const double dw = sqrt_dt * streams[i].normal();
                x[i] = step_full_truncation(x[i], drift, spec.g(x[i]), dt, dw);
            }
        }

        result.iterations = iter;
        if (prev) {
            const double gap =
                path_distance(prev->measure_path(), law.measure_path());
            result.gaps.push_back(gap);
            if (gap < tol) {
                result.law = std::move(law);
                return result;
            }
        }
        prev = std::move(law);
        phi_frozen = std::move(phi_next);
    }
    throw NumericalError("picard_iterate: max_iter exceeded, last gap = " +
                         (result.gaps.empty() ? std::string("n/a")
                                              : fmt9(result.gaps.back())));
}

// Closed-form variance of the reduced model,
//   V(t) = 4 m_lambda int_0^t exp(-2 int_s^t phi) ds,
// evaluated with fourth-order quadrature so it can serve as an oracle for the
// Runge-Kutta route at tight tolerances.
inline std::vector<double> variance_closed_form(const std::vector<double>& phi_path,
                                                double m_lambda,
                                                const std::vector<double>& grid) {
    if (phi_path.size() != grid.size() || grid.empty())
        throw std::invalid_argument("variance_closed_form: grid/phi size mismatch");
    for (double p : phi_path)
        if (!(p >= 0.0))
            throw std::invalid_argument("variance_closed_form: phi must be >= 0");
    const std::vector<double> big_phi = detail::cumulative_integral(grid, phi_path);
    std::vector<double> weight(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        weight[k] = std::exp(2.0 * big_phi[k]);
    const std::vector<double> integral = detail::cumulative_integral(grid, weight);
    std::vector<double> v(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        v[k] = 4.0 * m_lambda * integral[k] / weight[k];
    v[0] = 0.0;
    return v;
}

// Classic Runge-Kutta on dV/dt = 4 m_lambda - 2 phi(t) V with V(0) = 0;
// phi is interpolated linearly at half steps.
inline std::vector<double> variance_ode(const std::vector<double>& phi_path,
                                        double m_lambda,
                                        const std::vector<double>& grid) {
    if (phi_path.size() != grid.size() || grid.empty())
        throw std::invalid_argument("variance_ode: grid/phi size mismatch");
    std::vector<double> v(grid.size(), 0.0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double h = grid[k] - grid[k - 1];
        const double p0 = phi_path[k - 1];
        const double p1 = phi_path[k];
        const double pm = 0.5 * (p0 + p1);
        const double y = v[k - 1];
        const double k1 = 4.0 * m_lambda - 2.0 * p0 * y;
        const double k2 = 4.0 * m_lambda - 2.0 * pm * (y + 0.5 * h * k1);
        const double k3 = 4.0 * m_lambda - 2.0 * pm * (y + 0.5 * h * k2);
        const double k4 = 4.0 * m_lambda - 2.0 * p1 * (y + h * k3);
        v[k] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return v;
}

// First grid time with phi(t) V(t) >= 2 m_lambda (the variance turning point),
// or nullopt when the product stays below the threshold on the whole grid.
// The variance must be nondecreasing up to that time; a decrease before the
// crossing means the inputs are inconsistent with the moment flow.
inline std::optional<double> monotonicity_time(const std::vector<double>& phi_path,
                                               double m_lambda,
                                               const std::vector<double>& grid) {
    const std::vector<double> v = variance_closed_form(phi_path, m_lambda, grid);
    const double threshold = 2.0 * m_lambda;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (phi_path[k] * v[k] >= threshold) {
            for (std::size_t j = 0; j + 1 < k; ++j)
                if (v[j + 1] < v[j] - 1e-9 * (1.0 + std::fabs(v[j])))
                    throw NumericalError(
                        "monotonicity_time: variance decreases before the crossing");
            return grid[k];
        }
    }
    return std::nullopt;
}

// LawPath CSV: t,mean,var,phi,q05,q50,q95.
inline void write_law_path_csv(std::ostream& os, const LawPath& law) {
    os << "t,mean,var,phi,q05,q50,q95\n";
    for (std::size_t k = 0; k < law.grid.size(); ++k) {
        const auto& m = law.measures[k];
        const double row[7] = {law.grid[k],    law.mean_path[k], law.var_path[k],
                               law.phi_path[k], m.quantile(0.05), m.quantile(0.50),
                               m.quantile(0.95)};
        csv_row(os, row, 7);
    }
}

} // namespace mfbesq
