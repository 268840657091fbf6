#pragma once

// The n-particle interacting system
//   dX_i = [delta + (mean(rho^n) - X_i) phi(rho^n)] dt + sqrt(X_i) g(X_i) dW_i,
// its tilted version with drift shifted by u_i * sigma(X_i), the accumulated
// Girsanov log-weight and quadratic control cost, martingale-residual
// diagnostics and shared-noise coupling experiments.
//
// Every particle owns a counter-based stream keyed by (seed, stream_id, i), so
// trajectories are a pure function of the configuration: replicas can run on
// any number of threads without changing a single bit of output.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "mfbesq/csv.hpp"
#include "mfbesq/errors.hpp"
#include "mfbesq/measures.hpp"
#include "mfbesq/model.hpp"
#include "mfbesq/sde.hpp"

namespace mfbesq {

// Feedback control u_i(t, X_i, mean(rho^n)); the same map is applied to every
// particle, matching the mean-field symmetry of the events studied here.
struct ControlSpec {
    std::function<double(double t, double x, double ensemble_mean)> u;

    static ControlSpec zero() { return {nullptr}; }
    static ControlSpec constant(double c) {
        return {[c](double, double, double) { return c; }};
    }
    static ControlSpec of_time(std::function<double(double)> fn) {
        return {[fn = std::move(fn)](double t, double, double) { return fn(t); }};
    }
    bool is_zero() const { return !u; }
};

// State snapshots at nodes of the recording grid plus dense per-step ensemble
// statistics. `states` is row-major: states[node * n + i].
struct SystemTrajectory {
    std::size_t n = 0;
    double dt = 0.0;
    std::size_t record_stride = 1;
    std::vector<double> grid;       // recording times, starts at 0, ends at T
    std::vector<double> states;     // one row of n values per grid node
    std::vector<double> mean_dense; // per simulation step node (size steps+1)
    std::vector<double> var_dense;
    std::vector<double> phi_dense;

    const double* row(std::size_t node) const { return states.data() + node * n; }

    EmpiricalMeasure measure_at(std::size_t node) const {
        return EmpiricalMeasure(
            std::vector<double>(row(node), row(node) + n));
    }

    MeasurePath measure_path() const {
        std::vector<EmpiricalMeasure> ms;
        ms.reserve(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) ms.push_back(measure_at(k));
        return MeasurePath(grid, std::move(ms));
    }

    double terminal_mean() const { return mean_dense.back(); }
    double terminal_sum() const { return mean_dense.back() * static_cast<double>(n); }
    double sup_mean() const {
        double s = mean_dense.front();
        for (double m : mean_dense) s = std::max(s, m);
        return s;
    }
};

struct ControlledRun {
    SystemTrajectory trajectory;
    double log_weight = 0.0;          // -sum_i int u_i dW_i - 1/2 sum_i int u_i^2 dt
    double cost = 0.0;                // 1/2 * (1/n) sum_i kappa_i
    std::vector<double> kappa;        // per-particle int u_i^2 dt
};

namespace detail {

struct NoControl {};

template <typename Ctl>
inline constexpr bool is_controlled_v = !std::is_same_v<std::decay_t<Ctl>, NoControl>;

// Shared stepping core. Statistics of rho^n are computed once per step, then
// every particle is advanced with the frozen (mean, phi) of that step.
template <typename Ctl>
ControlledRun run_system(std::size_t n, const ModelSpec& spec, const SchemeConfig& cfg,
                         double T, std::size_t record_stride, Ctl&& control) {
    if (n < 1) throw std::invalid_argument("simulate: need n >= 1");
    if (!(T > 0.0) || !(cfg.dt <= T))
        throw std::invalid_argument("simulate: need 0 < dt <= T");
    if (record_stride < 1) record_stride = 1;

    const auto steps = static_cast<std::size_t>(std::llround(T / cfg.dt));
    const double dt = cfg.dt;
    const double sqrt_dt = std::sqrt(dt);
    const bool needs_measure =
        spec.phi.needs_full_measure() || static_cast<bool>(spec.custom_drift);

    std::vector<double> x = spec.initial_law.atoms(n);
    std::vector<Rng> streams;
    streams.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        streams.push_back(Rng::for_particle(cfg.seed, cfg.stream_id, i));

    ControlledRun run;
    SystemTrajectory& traj = run.trajectory;
    traj.n = n;
    traj.dt = dt;
    traj.record_stride = record_stride;
    traj.mean_dense.resize(steps + 1);
    traj.var_dense.resize(steps + 1);
    traj.phi_dense.resize(steps + 1);
    traj.grid.reserve(steps / record_stride + 2);
    traj.states.reserve((steps / record_stride + 2) * n);
    if constexpr (is_controlled_v<Ctl>) run.kappa.assign(n, 0.0);

    const double inv_n = 1.0 / static_cast<double>(n);
    double cost_sum = 0.0;

    for (std::size_t k = 0; k <= steps; ++k) {
        double sum = 0.0, sum_sq = 0.0;
        for (double xi : x) {
            sum += xi;
            sum_sq += xi * xi;
        }
        const double mean = sum * inv_n;
        const double var = std::max(0.0, sum_sq * inv_n - mean * mean);

        double phi_val;
        std::optional<EmpiricalMeasure> mu;
        if (needs_measure) {
            mu.emplace(x);
            phi_val = spec.phi.eval(*mu);
        } else {
            phi_val = spec.phi.eval_mean(mean);
        }

        traj.mean_dense[k] = mean;
        traj.var_dense[k] = var;
        traj.phi_dense[k] = phi_val;

        if (k % record_stride == 0 || k == steps) {
            traj.grid.push_back(dt * static_cast<double>(k));
            traj.states.insert(traj.states.end(), x.begin(), x.end());
        }
        if (k == steps) break;

        const double t = dt * static_cast<double>(k);
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = x[i];
            double drift = spec.custom_drift
                               ? spec.custom_drift(xi, *mu)
                               : spec.drift_mean_reverting(xi, mean, phi_val);
            const double gx = spec.g(xi);
            [[maybe_unused]] double ui = 0.0;
            if constexpr (is_controlled_v<Ctl>) {
                ui = control(t, xi, mean);
                drift += ui * std::sqrt(xi > 0.0 ? xi : 0.0) * gx;
            }
            const double dw = sqrt_dt * streams[i].normal();
            x[i] = step_full_truncation(xi, drift, gx, dt, dw);
            if constexpr (is_controlled_v<Ctl>) {
                run.log_weight -= ui * dw + 0.5 * ui * ui * dt;
                run.kappa[i] += ui * ui * dt;
                cost_sum += ui * ui * dt;
            }
        }
        if constexpr (is_controlled_v<Ctl>) {
            if (!std::isfinite(run.log_weight))
                throw NumericalError(
                    "simulate_controlled: non-finite Girsanov weight (control too "
                    "aggressive for dt)");
        }
    }

    run.cost = 0.5 * cost_sum * inv_n;
    return run;
}

} // namespace detail

// Plain n-particle system. Deterministic in (seed, stream_id, n, dt).
inline SystemTrajectory simulate(std::size_t n, const ModelSpec& spec,
                                 const SchemeConfig& cfg, double T,
                                 std::size_t record_stride = 1) {
    return detail::run_system(n, spec, cfg, T, record_stride, detail::NoControl{})
        .trajectory;
}

// Tilted system: drift gains u_i sigma(X_i); returns the trajectory together
// with the Girsanov log-weight and the (scale-n normalized) quadratic cost.
// Both the dW-integral of the weight and the cost use left-endpoint sums, so
// exp(log_weight) is an exact exponential martingale step by step.
inline ControlledRun simulate_controlled(std::size_t n, const ModelSpec& spec,
                                         const SchemeConfig& cfg, double T,
                                         const ControlSpec& ctrl,
                                         std::size_t record_stride = 1) {
    if (ctrl.is_zero())
        return detail::run_system(n, spec, cfg, T, record_stride, detail::NoControl{});
    return detail::run_system(n, spec, cfg, T, record_stride, ctrl.u);
}

// Twice-differentiable test function with bounded derivatives.
struct TestFunction {
    std::function<double(double)> f;
    std::function<double(double)> df;
    std::function<double(double)> d2f;
};

// Test function of k tagged particles; the compensator only needs the
// gradient and the diagonal of the Hessian.
struct TestFunctionK {
    std::function<double(const std::vector<double>&)> f;
    std::function<double(const std::vector<double>&, std::size_t)> df;  // d/dx_i
    std::function<double(const std::vector<double>&, std::size_t)> d2f; // d2/dx_i2
};

// Discrete compensated process for k tagged particles:
//   M(t) = f(X(t)) - f(X(0)) - sum over steps of
//          sum_i [ b(X_i, rho) df/dx_i + (1/2) sigma(X_i)^2 d2f/dx_i2 ] dt.
// Requires a densely recorded trajectory (record_stride == 1) and the builtin
// mean-reversion drift. Monte Carlo means of M(t) over replicas are zero.
inline std::vector<double> martingale_residual(const TestFunctionK& fn,
                                               const SystemTrajectory& traj,
                                               const ModelSpec& spec,
                                               const std::vector<std::size_t>& tagged) {
    if (traj.record_stride != 1)
        throw std::invalid_argument("martingale_residual: needs record_stride == 1");
    if (tagged.empty())
        throw std::invalid_argument("martingale_residual: needs at least one tagged particle");
    for (std::size_t i : tagged)
        if (i >= traj.n)
            throw std::invalid_argument("martingale_residual: tagged particle out of range");
    if (spec.custom_drift)
        throw std::invalid_argument("martingale_residual: custom drift not supported");

    const std::size_t nodes = traj.grid.size();
    std::vector<double> residual(nodes, 0.0);
    std::vector<double> x(tagged.size()), x0(tagged.size());
    for (std::size_t j = 0; j < tagged.size(); ++j) x0[j] = traj.row(0)[tagged[j]];
    const double f0 = fn.f(x0);
    double compensator = 0.0;
    for (std::size_t k = 1; k < nodes; ++k) {
        for (std::size_t j = 0; j < tagged.size(); ++j)
            x[j] = traj.row(k - 1)[tagged[j]];
        double generator = 0.0;
        for (std::size_t j = 0; j < tagged.size(); ++j) {
            const double b = spec.drift_mean_reverting(x[j], traj.mean_dense[k - 1],
                                                       traj.phi_dense[k - 1]);
            const double gx = spec.g(x[j]);
            generator += b * fn.df(x, j) + 0.5 * x[j] * gx * gx * fn.d2f(x, j);
        }
        compensator += generator * traj.dt;
        for (std::size_t j = 0; j < tagged.size(); ++j)
            x[j] = traj.row(k)[tagged[j]];
        residual[k] = fn.f(x) - f0 - compensator;
    }
    return residual;
}

inline std::vector<double> martingale_residual(const TestFunction& fn,
                                               const SystemTrajectory& traj,
                                               const ModelSpec& spec,
                                               std::size_t tagged = 0) {
    TestFunctionK wrapped{
        [&fn](const std::vector<double>& x) { return fn.f(x[0]); },
        [&fn](const std::vector<double>& x, std::size_t) { return fn.df(x[0]); },
        [&fn](const std::vector<double>& x, std::size_t) { return fn.d2f(x[0]); }};
    return martingale_residual(wrapped, traj, spec, std::vector<std::size_t>{tagged});
}

// Two systems driven by the same Brownian increments from different starting
// configurations; returns t -> sum_i |X_i(t) - X~_i(t)| on the dense grid.
// Both systems see identical dW_i by construction (one draw per particle-step).
inline std::vector<double> coupling_gap(std::size_t n, const ModelSpec& spec,
                                        const SchemeConfig& cfg, double T,
                                        const std::vector<double>& init_a,
                                        const std::vector<double>& init_b) {
    if (init_a.size() != n || init_b.size() != n)
        throw std::invalid_argument("coupling_gap: initial lists must have size n");
    const auto steps = static_cast<std::size_t>(std::llround(T / cfg.dt));
    const double dt = cfg.dt;
    const double sqrt_dt = std::sqrt(dt);
    const bool needs_measure = spec.phi.needs_full_measure();
    if (spec.custom_drift)
        throw std::invalid_argument("coupling_gap: custom drift not supported");

    std::vector<double> xa = init_a, xb = init_b;
    std::vector<Rng> streams;
    streams.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        streams.push_back(Rng::for_particle(cfg.seed, cfg.stream_id, i));

    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> gap(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += std::fabs(xa[i] - xb[i]);
        gap[k] = d;
        if (k == steps) break;

        double mean_a = 0.0, mean_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean_a += xa[i];
            mean_b += xb[i];
        }
        mean_a *= inv_n;
        mean_b *= inv_n;
        const double phi_a = needs_measure ? spec.phi.eval(EmpiricalMeasure(xa))
                                           : spec.phi.eval_mean(mean_a);
        const double phi_b = needs_measure ? spec.phi.eval(EmpiricalMeasure(xb))
                                           : spec.phi.eval_mean(mean_b);
        for (std::size_t i = 0; i < n; ++i) {
            const double dw = sqrt_dt * streams[i].normal();
            xa[i] = step_full_truncation(
                xa[i], spec.drift_mean_reverting(xa[i], mean_a, phi_a), spec.g(xa[i]),
                dt, dw);
            xb[i] = step_full_truncation(
                xb[i], spec.drift_mean_reverting(xb[i], mean_b, phi_b), spec.g(xb[i]),
                dt, dw);
        }
    }
    return gap;
}

// Full trajectory dump: t,i,x.
inline void write_trajectory_csv(std::ostream& os, const SystemTrajectory& traj) {
    os << "t,i,x\n";
    for (std::size_t k = 0; k < traj.grid.size(); ++k)
        for (std::size_t i = 0; i < traj.n; ++i) {
            os << fmt9(traj.grid[k]) << ',' << i << ',' << fmt9(traj.row(k)[i]) << '\n';
        }
}

} // namespace mfbesq
