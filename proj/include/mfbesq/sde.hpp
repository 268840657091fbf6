#pragma once

// Single-path numerics for square-root diffusions dX = b dt + sqrt(X) g(X) dW:
// boundary-preserving full-truncation Euler stepping, an exact squared-Bessel
// transition sampler (noncentral chi-square), the integrating-factor time
// change used for boundary analysis, and path statistics (quadratic variation,
// local time at the origin).

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include "mfbesq/csv.hpp"
#include "mfbesq/errors.hpp"
#include "mfbesq/rng.hpp"

namespace mfbesq {

enum class Scheme { FullTruncationEuler, ExactBesq };

// (seed, stream_id) fully determine every random draw of a run.
struct SchemeConfig {
    double dt;
    Scheme scheme = Scheme::FullTruncationEuler;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    SchemeConfig(double dt_, std::uint64_t seed_ = 0, std::uint64_t stream_id_ = 0,
                 Scheme scheme_ = Scheme::FullTruncationEuler)
        : dt(dt_), scheme(scheme_), seed(seed_), stream_id(stream_id_) {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw std::invalid_argument("SchemeConfig: dt must be positive");
    }

    SchemeConfig with_stream(std::uint64_t s) const {
        SchemeConfig c = *this;
        c.stream_id = s;
        return c;
    }
};

// Nonnegative path on a uniform grid 0 = t_0 < ... < t_M = T.
struct PathSample {
    double dt;
    std::vector<double> values; // values[k] = X(k * dt)

    PathSample(double dt_, std::vector<double> values_)
        : dt(dt_), values(std::move(values_)) {
        if (!(dt > 0.0)) throw std::invalid_argument("PathSample: dt must be positive");
        if (values.empty()) throw std::invalid_argument("PathSample: empty path");
        for (double v : values)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument("PathSample: values must be finite and >= 0");
    }

    std::size_t steps() const { return values.size() - 1; }
    double horizon() const { return dt * static_cast<double>(steps()); }
    double time_at(std::size_t k) const { return dt * static_cast<double>(k); }
};

// One full-truncation Euler step: the state is kept nonnegative by clamping,
// and the square root sees the truncated state.
inline double step_full_truncation(double x, double drift, double g_at_x,
                                   double dt, double dw) {
    if (!std::isfinite(x) || !std::isfinite(drift) || !std::isfinite(g_at_x) ||
        !std::isfinite(dt) || !std::isfinite(dw))
        throw NumericalError("step_full_truncation: non-finite input");
    const double xpos = x > 0.0 ? x : 0.0;
    const double next = x + drift * dt + std::sqrt(xpos) * g_at_x * dw;
    return next > 0.0 ? next : 0.0;
}

// Exact draw from the squared-Bessel transition: for dX = dim dt + 2 sqrt(X) dW
// started at x0, X(t) = t * ncx2(dim, x0 / t), sampled as a Poisson mixture of
// chi-squares. Mean is x0 + dim * t. dim = x0 = 0 is absorbed at the origin.
inline double sample_besq_exact(double x0, double dim, double t, Rng& rng) {
    if (!(x0 >= 0.0) || !(dim >= 0.0) || !(t > 0.0))
        throw std::invalid_argument("sample_besq_exact: need x0 >= 0, dim >= 0, t > 0");
    const double noncentrality = x0 / t;
    double dof = dim;
    if (noncentrality > 0.0)
        dof += 2.0 * static_cast<double>(rng.poisson(0.5 * noncentrality));
    if (dof == 0.0) return 0.0;
    return t * rng.chi_square(dof);
}

// Full-truncation Euler path of a scalar diffusion dX = b(t,X) dt + sqrt(X) g(X) dW.
inline PathSample simulate_scalar_sde(double x0, double T,
                                      const std::function<double(double, double)>& drift,
                                      const std::function<double(double)>& g,
                                      const SchemeConfig& cfg) {
    if (!(x0 >= 0.0)) throw std::invalid_argument("simulate_scalar_sde: x0 must be >= 0");
    if (!(T >= cfg.dt)) throw std::invalid_argument("simulate_scalar_sde: need T >= dt");
    const auto steps = static_cast<std::size_t>(std::llround(T / cfg.dt));
    const double sqrt_dt = std::sqrt(cfg.dt);
    Rng rng = Rng::for_particle(cfg.seed, cfg.stream_id, 0);
    std::vector<double> values(steps + 1);
    values[0] = x0;
    double x = x0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = cfg.dt * static_cast<double>(k);
        const double dw = sqrt_dt * rng.normal();
        x = step_full_truncation(x, drift(t, x), g(x), cfg.dt, dw);
        values[k + 1] = x;
    }
    return PathSample(cfg.dt, std::move(values));
}

// Convenience: squared Bessel path (constant drift dim, g = 2).
inline PathSample simulate_besq_ft(double x0, double dim, double T,
                                   const SchemeConfig& cfg) {
    return simulate_scalar_sde(
        x0, T, [dim](double, double) { return dim; }, [](double) { return 2.0; }, cfg);
}

// Squared Bessel path honouring cfg.scheme: truncated Euler stepping, or exact
// node-by-node transition sampling (the chain is Markov, so chaining exact
// dt-transitions gives the exact joint law on the grid).
inline PathSample simulate_besq_path(double x0, double dim, double T,
                                     const SchemeConfig& cfg) {
    if (cfg.scheme == Scheme::FullTruncationEuler)
        return simulate_besq_ft(x0, dim, T, cfg);
    const auto steps = static_cast<std::size_t>(std::llround(T / cfg.dt));
    Rng rng = Rng::for_particle(cfg.seed, cfg.stream_id, 0);
    std::vector<double> values(steps + 1);
    values[0] = x0;
    for (std::size_t k = 0; k < steps; ++k)
        values[k + 1] = sample_besq_exact(values[k], dim, cfg.dt, rng);
    return PathSample(cfg.dt, std::move(values));
}

// Cumulative quadratic variation <X>(t) = int 4 X ds (the model has g = 2),
// trapezoidal in time. Returns one value per grid node.
inline std::vector<double> quadratic_variation(const PathSample& x) {
    std::vector<double> qv(x.values.size(), 0.0);
    for (std::size_t k = 1; k < x.values.size(); ++k)
        qv[k] = qv[k - 1] + 2.0 * (x.values[k - 1] + x.values[k]) * x.dt;
    return qv;
}

// Finite-epsilon occupation estimate of the semimartingale local time at 0:
// (1/2eps) int 1{X < eps} d<X>, with d<X> = 4 X dt. The limit eps -> 0 is the
// caller's experiment; this reports the value at the terminal time.
inline double local_time_at_zero(const PathSample& x, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("local_time_at_zero: epsilon must be > 0");
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < x.values.size(); ++k) {
        const double v = x.values[k];
        if (v < epsilon) acc += 4.0 * v * x.dt;
    }
    return acc / (2.0 * epsilon);
}

// Integrating-factor transform of the reduced mean-reverting model:
//   zeta(t) = exp( (1/2) int phi ），  psi(t) = int zeta^2,  xi = X zeta^2.
// In the psi-clock xi is a squared Bessel process of variable dimension
// m_lambda * phi(t); `dimension[k]` stores that dimension at clock time psi(t_k).
struct TimeChange {
    std::vector<double> grid;      // original time
    std::vector<double> zeta;      // >= 1 while phi >= 0
    std::vector<double> psi;       // strictly increasing, psi(t) >= t
    std::vector<double> xi;        // X * zeta^2
    std::vector<double> dimension; // m_lambda * phi at clock time psi(t)
};

inline TimeChange time_change_transform(const PathSample& x,
                                        const std::vector<double>& phi_path,
                                        double m_lambda) {
    if (phi_path.size() != x.values.size())
        throw std::invalid_argument("time_change_transform: phi_path must match the path grid");
    if (!(m_lambda > 0.0))
        throw std::invalid_argument("time_change_transform: m_lambda must be positive");
    for (double p : phi_path)
        if (!(p >= 0.0) || !std::isfinite(p))
            throw AssumptionError("time_change_transform: phi must map to nonnegative reals");

    const std::size_t nodes = x.values.size();
    TimeChange tc;
    tc.grid.resize(nodes);
    tc.zeta.resize(nodes);
    tc.psi.resize(nodes);
    tc.xi.resize(nodes);
    tc.dimension.resize(nodes);

    double half_int_phi = 0.0; // (1/2) int_0^t phi, trapezoidal
    double psi = 0.0;          // int_0^t zeta^2, trapezoidal
    double zeta_prev = 1.0;
    for (std::size_t k = 0; k < nodes; ++k) {
        if (k > 0) {
            half_int_phi += 0.25 * (phi_path[k - 1] + phi_path[k]) * x.dt;
            const double zeta_k = std::exp(half_int_phi);
            psi += 0.5 * (zeta_prev * zeta_prev + zeta_k * zeta_k) * x.dt;
            zeta_prev = zeta_k;
        }
        tc.grid[k] = x.time_at(k);
        tc.zeta[k] = zeta_prev;
        tc.psi[k] = psi;
        tc.xi[k] = x.values[k] * zeta_prev * zeta_prev;
        tc.dimension[k] = m_lambda * phi_path[k];
    }
    return tc;
}

// PathSample CSV: t,x.
inline void write_path_csv(std::ostream& os, const PathSample& x) {
    os << "t,x\n";
    for (std::size_t k = 0; k < x.values.size(); ++k) {
        const double row[2] = {x.time_at(k), x.values[k]};
        csv_row(os, row, 2);
    }
}

} // namespace mfbesq
