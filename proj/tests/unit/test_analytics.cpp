#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfbesq/analytics.hpp"
#include "mfbesq/rng.hpp"
#include "mfbesq/sde.hpp"

using namespace mfbesq;

TEST_CASE("boundary classification: the four regimes") {
    // product_inf = 3 > 2: transient and never hits the origin.
    CHECK(classify_boundary(2.0, 1.5, 1.5).cls == BoundaryClass::TransientNeverHitsZero);
    // products in (1, 2): hits the origin with null local time.
    CHECK(classify_boundary(1.0, 1.2, 1.8).cls == BoundaryClass::HitsZeroNullLocalTime);
    // product_sup <= 1 with product_inf > 0: instantaneously reflecting.
    CHECK(classify_boundary(0.5, 1.0, 2.0).cls == BoundaryClass::ReflectingWithLocalTime);
    // Both products exactly 2: recurrent and never hits zero.
    const auto r = classify_boundary(2.0, 1.0, 1.0);
    CHECK(r.cls == BoundaryClass::Recurrent);
    CHECK(r.never_hits_zero);
    CHECK(r.recurrent);

    CHECK_THROWS_AS((void)classify_boundary(1.0, 2.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)classify_boundary(0.0, 1.0, 2.0), std::invalid_argument);
}

TEST_CASE("boundary classification is pure and consistent on a randomized grid") {
    Rng rng(777, 0);
    int indeterminate = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const double m = 0.1 + 3.0 * rng.uniform01();
        const double lo = 3.0 * rng.uniform01();
        const double hi = lo + 3.0 * rng.uniform01();
        const auto c = classify_boundary(m, lo, hi);
        // Record fields restate the inequalities exactly.
        CHECK(c.product_inf == m * lo);
        CHECK(c.product_sup == m * hi);
        CHECK(c.transient == (m * lo > 2.0));
        CHECK(c.recurrent == (m * hi <= 2.0));
        // The class honours the bullet that fired.
        switch (c.cls) {
            case BoundaryClass::TransientNeverHitsZero:
                CHECK(m * lo > 2.0);
                break;
            case BoundaryClass::Recurrent:
                CHECK(m * lo >= 2.0);
                CHECK(m * hi <= 2.0);
                break;
            case BoundaryClass::HitsZeroNullLocalTime:
                CHECK(m * lo > 1.0);
                CHECK(m * hi < 2.0);
                break;
            case BoundaryClass::ReflectingWithLocalTime:
                CHECK(m * lo > 0.0);
                CHECK(m * hi <= 1.0);
                break;
            case BoundaryClass::Indeterminate:
                // No bullet applies.
                CHECK(!(m * lo > 2.0));
                CHECK(!(m * lo >= 2.0 && m * hi <= 2.0));
                CHECK(!(m * lo > 1.0 && m * hi < 2.0));
                CHECK(!(m * lo > 0.0 && m * hi <= 1.0));
                ++indeterminate;
                break;
        }
        // Determinism of the pure function.
        CHECK(classify_boundary(m, lo, hi).cls == c.cls);
    }
    CHECK(indeterminate > 0); // the parameter gaps are represented
}

TEST_CASE("gamma laplace transform") {
    const GammaParams p(2.0, 0.5);
    CHECK(gamma_laplace(p, 0.0) == 1.0);
    CHECK(gamma_laplace(p, 1.0) == doctest::Approx(std::pow(3.0, -0.5)));
    // Derivative at 0 equals minus the mean.
    const double h = 1e-6;
    const double deriv = (gamma_laplace(p, h) - gamma_laplace(p, 0.0)) / h;
    CHECK(deriv == doctest::Approx(-p.mean()).epsilon(1e-4));
}

TEST_CASE("laplace pde via characteristics: boundary and initial values") {
    const std::vector<double> phi(1001, 1.0);
    const auto u0 = [](double x) { return std::exp(-x); };
    CHECK(laplace_pde_solve(phi, 1e-3, 1.0, u0, 1.0, 0.0) == 1.0);
    CHECK(laplace_pde_solve(phi, 1e-3, 1.0, u0, 0.0, 2.0) == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("laplace pde matches the closed form for phi = 0") {
    // With phi = 0 the transform solves dU/dt + 2 x^2 dU/dx = 0, so
    // U(t,x) = u0(x / (1 + 2 x t)); for a point mass at 1 this is the
    // squared Bessel dimension-zero transform.
    const std::vector<double> phi(2001, 0.0);
    const auto u0 = [](double x) { return std::exp(-x); };
    for (double t : {0.5, 1.0, 2.0})
        for (double x : {0.25, 0.5, 1.0, 2.0, 5.0}) {
            const double expect = std::exp(-x / (1.0 + 2.0 * x * t));
            CHECK(laplace_pde_solve(phi, 1e-3, 1.0, u0, t, x) ==
                  doctest::Approx(expect).epsilon(1e-9));
        }
}

TEST_CASE("laplace pde agrees with exact-sampler Monte Carlo for phi = 1") {
    // Constant phi = 1, m_lambda = 1, point mass at 1: the reduced-model
    // solution is exp(-t) * BESQ(1)(e^t - 1) by the integrating-factor
    // transform, sampled exactly.
    const double m_lambda = 1.0;
    const std::vector<double> phi(2001, 1.0);
    const auto u0 = [](double x) { return std::exp(-x); };
    const int draws = 100000;
    for (double t : {0.5, 1.0}) {
        for (double x : {0.5, 1.0, 2.0}) {
            const double u_pde = laplace_pde_solve(phi, 1e-3, m_lambda, u0, t, x);
            double mc = 0.0, mc_sq = 0.0;
            const double zeta_sq = std::exp(t);
            const double clock = std::exp(t) - 1.0;
            for (int i = 0; i < draws; ++i) {
                Rng rng = Rng::for_particle(888, static_cast<std::uint64_t>(10 * t),
                                            static_cast<std::uint64_t>(i));
                const double sample = sample_besq_exact(1.0, m_lambda * 1.0, clock, rng) / zeta_sq;
                const double v = std::exp(-x * sample);
                mc += v;
                mc_sq += v * v;
            }
            mc /= draws;
            const double se = std::sqrt((mc_sq / draws - mc * mc) / draws);
            CHECK(std::fabs(u_pde - mc) < 3.0 * se + 1e-4);
        }
    }
}

TEST_CASE("laplace pde residual under finite differences is small") {
    // Plug the numerical transform into the PDE with centered differences.
    const double m_lambda = 1.0;
    const std::vector<double> phi(2001, 1.0);
    const auto u0 = [](double x) { return std::exp(-x); };
    const double h = 2e-3;
    for (double t : {0.4, 0.8}) {
        for (double x : {0.5, 1.0, 2.0}) {
            const auto U = [&](double tt, double xx) {
                return laplace_pde_solve(phi, 1e-3, m_lambda, u0, tt, xx);
            };
            const double du_dt = (U(t + h, x) - U(t - h, x)) / (2.0 * h);
            const double du_dx = (U(t, x + h) - U(t, x - h)) / (2.0 * h);
            const double residual =
                du_dt + x * (1.0 + 2.0 * x) * du_dx + m_lambda * x * 1.0 * U(t, x);
            CHECK(std::fabs(residual) < 1e-3);
        }
    }
}

TEST_CASE("transform values are monotone and convex in x") {
    const std::vector<double> phi(1001, 0.7);
    const auto u0 = [](double x) { return std::exp(-x); };
    for (double t : {0.3, 0.9}) {
        std::vector<double> us;
        for (double x = 0.0; x <= 4.0; x += 0.25)
            us.push_back(laplace_pde_solve(phi, 1e-3, 1.0, u0, t, x));
        for (std::size_t i = 0; i + 1 < us.size(); ++i) {
            CHECK(us[i + 1] < us[i]); // nonincreasing
            CHECK(us[i] > 0.0);
            CHECK(us[i] <= 1.0);
        }
        for (std::size_t i = 1; i + 1 < us.size(); ++i)
            CHECK(us[i + 1] - 2.0 * us[i] + us[i - 1] > -1e-9); // convex
    }
}

TEST_CASE("stationary fixed point: constant phi lands in one iteration") {
    const auto fp = stationary_fixed_point(PhiSpec::constant(1.0), 1.0, 1e-12, 50);
    CHECK(fp.iterations == 1);
    CHECK(fp.phi_star == doctest::Approx(1.0));
    CHECK(fp.stationary.scale == doctest::Approx(2.0));
    CHECK(fp.stationary.shape == doctest::Approx(0.5));
    // Gamma mean equals m_lambda exactly by construction.
    CHECK(fp.stationary.mean() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("stationary fixed point preconditions and iteration cap") {
    // Non-recurrent regime: m_lambda * sup phi > 2.
    CHECK_THROWS_AS((void)stationary_fixed_point(PhiSpec::constant(3.0), 1.0, 1e-10, 50),
                    AssumptionError);
    // Vanishing phi cannot support a Gamma stationary law.
    CHECK_THROWS_AS((void)stationary_fixed_point(PhiSpec::constant(0.0), 1.0, 1e-10, 50),
                    AssumptionError);
    // Exhausting max_iter reports the last residual.
    CHECK_THROWS_WITH_AS(
        (void)stationary_fixed_point(PhiSpec::logistic_in_mean(0.4, 1.0, 0.5, 1.5), 1.0,
                                     1e-30, 2),
        doctest::Contains("max_iter"), NumericalError);
}

TEST_CASE("stationary fixed point: logistic phi is self-consistent under MC") {
    const double m_lambda = 1.0;
    const PhiSpec phi = PhiSpec::logistic_in_mean(0.4, 1.0, 0.5, 1.5);
    const auto fp = stationary_fixed_point(phi, m_lambda, 1e-10, 200);
    CHECK(fp.stationary.mean() == doctest::Approx(m_lambda).epsilon(1e-12));

    // Independent Monte Carlo evaluation of phi on Gamma draws.
    const int draws = 100000;
    std::vector<double> samples(draws);
    for (int i = 0; i < draws; ++i) {
        Rng rng = Rng::for_particle(999, 0, static_cast<std::uint64_t>(i));
        samples[i] = fp.stationary.scale * rng.gamma(fp.stationary.shape);
    }
    const double phi_mc = phi.eval(EmpiricalMeasure(samples));
    CHECK(std::fabs(phi_mc - fp.phi_star) < 1e-3);
}

TEST_CASE("laplace grid csv") {
    LaplaceGrid grid;
    grid.ts = {0.5};
    grid.xs = {1.0, 2.0};
    grid.u_pde = {0.5, 0.25};
    grid.u_mc = {0.51, 0.26};
    grid.abs_err = {0.01, 0.01};
    std::ostringstream os;
    write_laplace_grid_csv(os, grid);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,x,U_pde,U_mc,abs_err");
    std::getline(in, line);
    CHECK(line == "0.5,1,0.5,0.51,0.01");
}
