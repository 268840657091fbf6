// Acceptance suite: one criterion per numbered check, each printing a single
// PASS/FAIL line with the measured quantities and its pinned tolerance.
//
//   acceptance [--only K]
//
// Exit code 0 iff every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mfbesq/analytics.hpp"
#include "mfbesq/experiments.hpp"
#include "mfbesq/ldp.hpp"
#include "mfbesq/mckean_vlasov.hpp"
#include "mfbesq/measures.hpp"
#include "mfbesq/model.hpp"
#include "mfbesq/particles.hpp"
#include "mfbesq/rng.hpp"
#include "mfbesq/sde.hpp"

using namespace mfbesq;

namespace {

ModelSpec make_model(double delta, double phi_const, double x0) {
    return ModelSpec(delta, PhiSpec::constant(phi_const), GSpec::constant(2.0),
                     InitialLaw::point_mass(x0));
}

// 1. Mean identity E[X(t)] = m_lambda + delta t for the n-particle system:
//    n=2000, delta=0.1, lambda=point(1), g=2, phi=1, T=1, dt=1e-3, 20 replicas;
//    ensemble-of-replicas mean of rho^n(1) within 3 stderr of 1.1.
bool criterion_mean_identity(std::ostringstream& out) {
    const ModelSpec spec = make_model(0.1, 1.0, 1.0);
    const int replicas = 20;
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < replicas; ++r) {
        const SystemTrajectory traj = simulate(
            2000, spec, SchemeConfig(1e-3, 101, static_cast<std::uint64_t>(r)), 1.0, 1000);
        const double m = traj.terminal_mean();
        sum += m;
        sum_sq += m * m;
    }
    const double mean = sum / replicas;
    const double sd = std::sqrt(std::max(0.0, sum_sq / replicas - mean * mean));
    const double se = sd / std::sqrt(static_cast<double>(replicas));
    out << "mean=" << fmt9(mean) << " target=1.1 |err|=" << fmt9(std::fabs(mean - 1.1))
        << " 3se=" << fmt9(3.0 * se);
    return std::fabs(mean - 1.1) < 3.0 * se;
}

// 2. Sum process is a squared Bessel process of dimension n*delta: n=500,
//    delta=0.2, T=2 (lambda=point(5), phi=1, dt=5e-3). Mean of S_n(2) within
//    3 stderr of S_n(0)+200 over the replicas, and two-sample KS between 1e4
//    simulated sums and 1e5 exact-transition draws below 0.03.
bool criterion_sum_process(std::ostringstream& out) {
    const double x0 = 5.0, delta = 0.2, T = 2.0;
    const std::size_t n = 500;
    const ModelSpec spec = make_model(delta, 1.0, x0);
    const double s0 = x0 * static_cast<double>(n);
    const double target = s0 + static_cast<double>(n) * delta * T;

    const int replicas = 10000;
    std::vector<double> sums(replicas);
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < replicas; ++r) {
        const SystemTrajectory traj = simulate(
            n, spec, SchemeConfig(5e-3, 202, static_cast<std::uint64_t>(r)), T, 400);
        sums[r] = traj.terminal_sum();
        sum += sums[r];
        sum_sq += sums[r] * sums[r];
    }
    const double mean = sum / replicas;
    const double sd = std::sqrt(sum_sq / replicas - mean * mean);
    const double se = sd / std::sqrt(static_cast<double>(replicas));

    const int oracle_draws = 100000;
    std::vector<double> oracle(oracle_draws);
    for (int i = 0; i < oracle_draws; ++i) {
        Rng rng = Rng::for_particle(203, 0, static_cast<std::uint64_t>(i));
        oracle[i] = sample_besq_exact(s0, static_cast<double>(n) * delta, T, rng);
    }
    const double ks = ks_two_sample(sums, oracle);
    out << "mean(S)=" << fmt9(mean) << " target=" << fmt9(target)
        << " |err|=" << fmt9(std::fabs(mean - target)) << " 3se=" << fmt9(3.0 * se)
        << " KS=" << fmt9(ks) << " (<0.03)";
    return std::fabs(mean - target) < 3.0 * se && ks < 0.03;
}

// 3. Variance flow: delta=0, m=1, phi=1, N=5000, T=2. Ensemble variance within
//    5% of V(t)=2(1-exp(-2t)) at t in {0.5,1,2} (variance estimated by
//    averaging 8 independent N=5000 ensembles), and the Runge-Kutta route
//    matches the closed form to 1e-8 relative on the dense grid.
bool criterion_variance(std::ostringstream& out) {
    const ModelSpec spec = make_model(0.0, 1.0, 1.0);
    const std::size_t N = 5000;
    const int replicas = 8;
    std::vector<double> grid;
    std::vector<double> var_acc;
    for (int r = 0; r < replicas; ++r) {
        const LawPath law = solve_selfconsistent(
            spec, N, SchemeConfig(1e-3, 303, static_cast<std::uint64_t>(r)), 2.0, 100);
        if (r == 0) {
            grid = law.grid;
            var_acc.assign(law.var_path.size(), 0.0);
        }
        for (std::size_t k = 0; k < law.var_path.size(); ++k)
            var_acc[k] += law.var_path[k] / replicas;
    }
    bool ok = true;
    double worst = 0.0;
    for (double t : {0.5, 1.0, 2.0}) {
        const double expect = 2.0 * (1.0 - std::exp(-2.0 * t));
        std::size_t node = 0;
        for (std::size_t k = 0; k < grid.size(); ++k)
            if (std::fabs(grid[k] - t) < 1e-9) node = k;
        const double rel = std::fabs(var_acc[node] - expect) / expect;
        worst = std::max(worst, rel);
        ok = ok && rel < 0.05;
    }

    const auto steps = static_cast<std::size_t>(std::llround(2.0 / 1e-3));
    std::vector<double> dense(steps + 1), phi(steps + 1, 1.0);
    for (std::size_t k = 0; k <= steps; ++k) dense[k] = 1e-3 * static_cast<double>(k);
    const auto closed = variance_closed_form(phi, 1.0, dense);
    const auto rk4 = variance_ode(phi, 1.0, dense);
    double ode_err = 0.0;
    for (std::size_t k = 1; k <= steps; ++k)
        ode_err = std::max(ode_err, std::fabs(rk4[k] - closed[k]) / closed[k]);
    out << "max_rel_var_err=" << fmt9(worst) << " (<0.05) rk4_vs_closed="
        << fmt9(ode_err) << " (<1e-8)";
    return ok && ode_err < 1e-8;
}

// 4. Stationary Gamma law: delta=0, m=1, phi=1 (recurrent), T=50, N=5000.
//    The limit equation is simulated with the frozen exact coefficient flow
//    (independent copies); terminal KS against the fixed-point Gamma < 0.02.
bool criterion_stationary(std::ostringstream& out) {
    const ModelSpec spec = make_model(0.0, 1.0, 1.0);
    const FixedPointResult fp = stationary_fixed_point(spec.phi, 1.0, 1e-10, 100);
    const auto steps = static_cast<std::size_t>(std::llround(50.0 / 5e-4));
    const PicardResult picard =
        picard_iterate(spec, 5000, SchemeConfig(5e-4, 404), 50.0, 0.05, 5, steps);
    const double ks = ks_statistic(picard.law.measures.back(), fp.stationary);
    out << "phi_star=" << fmt9(fp.phi_star) << " gamma=(" << fmt9(fp.stationary.scale)
        << "," << fmt9(fp.stationary.shape) << ") KS=" << fmt9(ks) << " (<0.02)";
    return ks < 0.02;
}

// 5. Law of large numbers: d1-path distance to an N=8000 reference ensemble
//    strictly decreasing across n in {100,400,1600} for at least 8 of 10 seed
//    triples.
bool criterion_lln(std::ostringstream& out) {
    const ModelSpec spec = make_model(0.1, 1.0, 1.0);
    int decreasing = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const SchemeConfig cfg(2e-3, 505, 1000000ULL * static_cast<std::uint64_t>(trial));
        const auto d = lln_distances(spec, {100, 400, 1600}, 8000, cfg, 1.0, 50);
        if (d[0] > d[1] && d[1] > d[2]) ++decreasing;
    }
    out << "strictly_decreasing_triples=" << decreasing << "/10 (>=8)";
    return decreasing >= 8;
}

// 6. Propagation of chaos: terminal pair correlation over 2000 replicas
//    decreasing in n over {100,400,1600} and below 0.05 at n=1600.
bool criterion_chaos(std::ostringstream& out) {
    const ModelSpec spec = make_model(0.0, 2.0, 1.0);
    const ChaosResult chaos =
        chaos_experiment(spec, {100, 400, 1600}, 2000, SchemeConfig(0.02, 606), 2.0);
    out << "corr=" << fmt9(chaos.corr[0]) << "," << fmt9(chaos.corr[1]) << ","
        << fmt9(chaos.corr[2]) << " (decreasing, last<0.05)";
    return std::fabs(chaos.corr[0]) > std::fabs(chaos.corr[1]) &&
           std::fabs(chaos.corr[1]) > std::fabs(chaos.corr[2]) &&
           std::fabs(chaos.corr[2]) < 0.05;
}

// 7. Laplace transform PDE along characteristics vs exact-sampler Monte Carlo
//    (1e5 draws) within 3 stderr + 1e-4 on {0.5,1}x{0.5,1,2}, for phi=0 and
//    phi=1; centered-difference PDE residual below 1e-3 at the probes.
bool criterion_laplace(std::ostringstream& out) {
    const double m_lambda = 1.0;
    const auto u0 = [](double x) { return std::exp(-x); };
    const int draws = 100000;
    double worst_gap = 0.0, worst_resid = 0.0;
    bool ok = true;

    for (double phi_c : {0.0, 1.0}) {
        const std::vector<double> phi(2001, phi_c);
        for (double t : {0.5, 1.0}) {
            for (double x : {0.5, 1.0, 2.0}) {
                const double u_pde = laplace_pde_solve(phi, 1e-3, m_lambda, u0, t, x);
                double mc = 0.0, mc_sq = 0.0;
                for (int i = 0; i < draws; ++i) {
                    Rng rng = Rng::for_particle(
                        707, static_cast<std::uint64_t>(phi_c * 10 + t * 2),
                        static_cast<std::uint64_t>(i));
                    double sample;
                    if (phi_c == 0.0) {
                        sample = sample_besq_exact(1.0, 0.0, t, rng);
                    } else {
                        // Integrating factor: X(t) = e^{-t} BESQ(m)(e^t - 1).
                        sample = sample_besq_exact(1.0, m_lambda, std::exp(t) - 1.0, rng) *
                                 std::exp(-t);
                    }
                    const double v = std::exp(-x * sample);
                    mc += v;
                    mc_sq += v * v;
                }
                mc /= draws;
                const double se = std::sqrt(std::max(0.0, mc_sq / draws - mc * mc) / draws);
                const double gap = std::fabs(u_pde - mc);
                worst_gap = std::max(worst_gap, gap - 3.0 * se);
                ok = ok && gap < 3.0 * se + 1e-4;

                const double h = 2e-3;
                const auto U = [&](double tt, double xx) {
                    return laplace_pde_solve(phi, 1e-3, m_lambda, u0, tt, xx);
                };
                const double resid = (U(t + h, x) - U(t - h, x)) / (2.0 * h) +
                                     x * (phi_c + 2.0 * x) *
                                         (U(t, x + h) - U(t, x - h)) / (2.0 * h) +
                                     m_lambda * x * phi_c * u_pde;
                worst_resid = std::max(worst_resid, std::fabs(resid));
                ok = ok && std::fabs(resid) < 1e-3;
            }
        }
    }
    out << "max(|gap|-3se)=" << fmt9(worst_gap) << " (<1e-4) max_residual="
        << fmt9(worst_resid) << " (<1e-3)";
    return ok;
}

// 8. Girsanov correctness: zero control reproduces the plain run bit for bit;
//    E[exp(log_weight)] = 1 within 3 stderr; importance sampling agrees with
//    plain Monte Carlo on a moderate event within 3 combined stderr.
bool criterion_girsanov(std::ostringstream& out) {
    const ModelSpec spec = make_model(0.1, 1.0, 1.0);
    const SchemeConfig cfg(5e-3, 808);

    const SystemTrajectory plain = simulate(100, spec, cfg, 1.0);
    const ControlledRun zero =
        simulate_controlled(100, spec, cfg, 1.0, ControlSpec::constant(0.0));
    const bool bit_exact = zero.trajectory.states == plain.states &&
                           zero.log_weight == 0.0 && zero.cost == 0.0;

    const double u = 0.15;
    const int replicas = 4000;
    double wsum = 0.0, wsum_sq = 0.0;
    for (int r = 0; r < replicas; ++r) {
        const ControlledRun run = simulate_controlled(
            50, spec, SchemeConfig(5e-3, 809, static_cast<std::uint64_t>(r)), 1.0,
            ControlSpec::constant(u), 200);
        const double w = std::exp(run.log_weight);
        wsum += w;
        wsum_sq += w * w;
    }
    const double wmean = wsum / replicas;
    const double wse = std::sqrt((wsum_sq / replicas - wmean * wmean) /
                                 static_cast<double>(replicas));
    const bool martingale = std::fabs(wmean - 1.0) < 3.0 * wse;

    const RareEvent event = RareEvent::terminal_mean_above(1.2);
    const ISResult mc = importance_sampling(event, 100, spec, cfg, 1.0,
                                            ControlSpec::zero(), 3000);
    const ISResult is = importance_sampling(event, 100, spec, cfg.with_stream(77000), 1.0,
                                            ControlSpec::constant(0.08), 3000);
    const double combined = std::sqrt(mc.stderr_ * mc.stderr_ + is.stderr_ * is.stderr_);
    const bool unbiased = std::fabs(mc.p_hat - is.p_hat) < 3.0 * combined;

    out << "bit_exact=" << (bit_exact ? "yes" : "no") << " E[w]=" << fmt9(wmean)
        << " (3se=" << fmt9(3.0 * wse) << ") |p_mc-p_is|="
        << fmt9(std::fabs(mc.p_hat - is.p_hat)) << " (3se=" << fmt9(3.0 * combined) << ")";
    return bit_exact && martingale && unbiased;
}

// 9. Large-deviation scale-n behaviour for TerminalMeanAbove(m+delta T+0.3):
//    the sequence -(1/n) log p_n over n in {50,100,200} has relative spread
//    below 50% between the last two entries, and the stabilized rate (the
//    last entry, certified by the spread check) sits below 1.5x the
//    constant-control steering cost. The searched control doubles as the
//    importance-sampling tilt for the per-n estimates.
bool criterion_ldp_rates(std::ostringstream& out) {
    const ModelSpec spec = make_model(0.1, 1.0, 1.0);
    const double T = 0.22;
    const double a = 1.0 + 0.1 * T + 0.3;
    const RareEvent event = RareEvent::terminal_mean_above(a);
    const SchemeConfig cfg(1e-3, 909);

    std::vector<double> u_grid;
    for (int i = 0; i <= 200; ++i) u_grid.push_back(0.01 * i);
    const ControlSearchResult search =
        constant_control_search(event, spec, T, u_grid, cfg, 8000);

    const RateReport report =
        rate_fit(event, spec, cfg, T, {50, 100, 200}, 4000, search.u_best);
    const double bound = 1.5 * search.cost_best;
    out << "rates=" << fmt9(report.rate[0]) << "," << fmt9(report.rate[1]) << ","
        << fmt9(report.rate[2]) << " spread=" << fmt9(report.last_two_relative_spread)
        << " (<0.5) stabilized=" << fmt9(report.rate.back())
        << " bound=1.5*cost=" << fmt9(bound) << " (u*=" << fmt9(search.u_best) << ")";
    return report.last_two_relative_spread < 0.5 && report.rate.back() <= bound;
}

// 10. Pathwise uniqueness / coupling: identical starts with shared noise give
//     a bit-exact zero gap; an epsilon perturbation in one particle keeps the
//     mean terminal gap below 1.5 eps exp(C_b T) over 100 replicas.
bool criterion_coupling(std::ostringstream& out) {
    const ModelSpec spec = make_model(0.1, 1.0, 1.0);
    const std::size_t n = 50;
    const double T = 1.0;
    const std::vector<double> base(n, 1.0);

    const auto zero_gap = coupling_gap(n, spec, SchemeConfig(2e-3, 1010), T, base, base);
    bool zero_ok = true;
    for (double g : zero_gap) zero_ok = zero_ok && g == 0.0;

    // Drift Lipschitz constant in (x, mu) jointly: phi acting on the state
    // plus phi acting on the mean through d1.
    const double c_b = 2.0 * spec.phi.hi();
    bool bounded = true;
    std::ostringstream gaps;
    for (double eps : {1e-3, 1e-2}) {
        double mean_gap = 0.0;
        const int replicas = 100;
        for (int r = 0; r < replicas; ++r) {
            std::vector<double> shifted = base;
            shifted[0] += eps;
            const auto gap = coupling_gap(
                n, spec, SchemeConfig(2e-3, 1011, static_cast<std::uint64_t>(r)), T, base,
                shifted);
            mean_gap += gap.back();
        }
        mean_gap /= replicas;
        gaps << " gap(eps=" << fmt9(eps) << ")=" << fmt9(mean_gap);
        bounded = bounded && mean_gap <= 1.5 * eps * std::exp(c_b * T);
    }
    out << "zero_gap_bit_exact=" << (zero_ok ? "yes" : "no") << gaps.str()
        << " bound_factor=" << fmt9(1.5 * std::exp(c_b * T));
    return zero_ok && bounded;
}

// 11. Boundary regimes: the classifier reproduces the four bullets on a
//     randomized grid, and the occupation-time estimate of the boundary local
//     time is positive and stable under epsilon-halving in the reflecting
//     regime (m=0.5, phi=1) while shrinking by more than half per 4x epsilon
//     refinement in the (1,2) regime (m=1.5, phi=1); 500 paths per regime.
bool criterion_boundary(std::ostringstream& out) {
    Rng grid_rng(1111, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const double m = 0.1 + 3.0 * grid_rng.uniform01();
        const double lo = 3.0 * grid_rng.uniform01();
        const double hi = lo + 3.0 * grid_rng.uniform01();
        const auto c = classify_boundary(m, lo, hi);
        BoundaryClass expect = BoundaryClass::Indeterminate;
        if (m * lo > 2.0) expect = BoundaryClass::TransientNeverHitsZero;
        else if (m * lo >= 2.0)
            expect = (m * hi <= 2.0) ? BoundaryClass::Recurrent
                                     : BoundaryClass::Indeterminate;
        else if (m * lo > 1.0 && m * hi < 2.0)
            expect = BoundaryClass::HitsZeroNullLocalTime;
        else if (m * lo > 0.0 && m * hi <= 1.0)
            expect = BoundaryClass::ReflectingWithLocalTime;
        if (c.cls != expect) {
            out << "classifier mismatch at m=" << m << " lo=" << lo << " hi=" << hi;
            return false;
        }
    }

    // Local-time estimates for the reduced model dX = (m - X) dt + 2 sqrt(X) dW.
    const auto estimate = [](double m_lambda, double eps, int paths) {
        double acc = 0.0;
        for (int r = 0; r < paths; ++r) {
            const SchemeConfig cfg(1e-4, 1112, static_cast<std::uint64_t>(r));
            const PathSample path = simulate_scalar_sde(
                m_lambda, 4.0, [m_lambda](double, double x) { return m_lambda - x; },
                [](double) { return 2.0; }, cfg);
            acc += local_time_at_zero(path, eps);
        }
        return acc / paths;
    };

    const int paths = 500;
    const double refl_04 = estimate(0.5, 0.04, paths);
    const double refl_02 = estimate(0.5, 0.02, paths);
    const double refl_01 = estimate(0.5, 0.01, paths);
    const bool reflecting_ok = refl_04 > 0.0 && refl_02 > 0.0 && refl_01 > 0.0 &&
                               refl_02 / refl_04 > 0.5 && refl_02 / refl_04 < 2.0 &&
                               refl_01 / refl_02 > 0.5 && refl_01 / refl_02 < 2.0;

    const double null_04 = estimate(1.5, 0.04, paths);
    const double null_01 = estimate(1.5, 0.01, paths);
    const double null_0025 = estimate(1.5, 0.0025, paths);
    const bool null_ok = null_01 <= 0.5 * null_04 && null_0025 <= 0.5 * null_01;

    out << "reflecting L(eps)=" << fmt9(refl_04) << "," << fmt9(refl_02) << ","
        << fmt9(refl_01) << " null L(eps)=" << fmt9(null_04) << "," << fmt9(null_01)
        << "," << fmt9(null_0025);
    return reflecting_ok && null_ok;
}

// 12. Stationary self-consistency phi(alpha) = phi*: logistic phi, fixed point
//     validated by an independent 1e5-sample Monte Carlo evaluation within 1e-3.
bool criterion_self_consistency(std::ostringstream& out) {
    const double m_lambda = 1.0;
    const PhiSpec phi = PhiSpec::logistic_in_mean(0.4, 1.0, 0.5, 1.5);
    const FixedPointResult fp = stationary_fixed_point(phi, m_lambda, 1e-10, 200);

    const int draws = 100000;
    std::vector<double> samples(draws);
    for (int i = 0; i < draws; ++i) {
        Rng rng = Rng::for_particle(1212, 0, static_cast<std::uint64_t>(i));
        samples[i] = fp.stationary.scale * rng.gamma(fp.stationary.shape);
    }
    const double phi_mc = phi.eval(EmpiricalMeasure(samples));
    const double err = std::fabs(phi_mc - fp.phi_star);
    out << "phi_star=" << fmt9(fp.phi_star) << " phi(alpha)_mc=" << fmt9(phi_mc)
        << " |err|=" << fmt9(err) << " (<1e-3)";
    return err < 1e-3;
}

struct Criterion {
    int id;
    const char* title;
    std::function<bool(std::ostringstream&)> run;
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    }

    const std::vector<Criterion> criteria = {
        {1, "mean identity E[X(t)] = m + delta t", criterion_mean_identity},
        {2, "sum process is BESQ(n delta)", criterion_sum_process},
        {3, "variance ODE and closed form", criterion_variance},
        {4, "stationary Gamma law", criterion_stationary},
        {5, "law of large numbers (d1 path distance)", criterion_lln},
        {6, "propagation of chaos (pair correlation)", criterion_chaos},
        {7, "Laplace transform PDE vs Monte Carlo", criterion_laplace},
        {8, "Girsanov weights and importance sampling", criterion_girsanov},
        {9, "large-deviation rates at scale n", criterion_ldp_rates},
        {10, "pathwise uniqueness / coupling bound", criterion_coupling},
        {11, "boundary regimes and local time", criterion_boundary},
        {12, "stationary self-consistency phi(alpha)=phi*", criterion_self_consistency},
    };

    int failures = 0, ran = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        ++ran;
        std::ostringstream detail;
        bool pass = false;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            pass = c.run(detail);
        } catch (const std::exception& e) {
            detail << "exception: " << e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %2d: %s -- %s (%.1fs)\n", pass ? "PASS" : "FAIL", c.id,
                    c.title, detail.str().c_str(), secs);
        std::fflush(stdout);
        if (!pass) ++failures;
    }
    if (ran == 0) {
        std::printf("no criterion selected (use --only 1..12 or no flag for all)\n");
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
