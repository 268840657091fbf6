#pragma once

// Model coefficients for the mean-reverting square-root family
//   b(x, mu) = delta + (mean(mu) - x) * phi(mu),   sigma(x) = sqrt(x) * g(x),
// together with the initial law and the construction-time assumption checks
// (drift positive at the origin, phi bounded Lipschitz nonnegative, g bounded
// strictly positive, initial mean strictly positive).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mfbesq/errors.hpp"
#include "mfbesq/measures.hpp"
#include "mfbesq/rng.hpp"

namespace mfbesq {

// Interaction intensity phi: a bounded Lipschitz map from measures to [lo, hi].
class PhiSpec {
  public:
    enum class Kind { Constant, LogisticInMean, Custom };

    static PhiSpec constant(double c) {
        if (!(c >= 0.0) || !std::isfinite(c))
            throw std::invalid_argument("PhiSpec::constant: need c >= 0");
        PhiSpec p;
        p.kind_ = Kind::Constant;
        p.lo_ = p.hi_ = c;
        p.lipschitz_ = 0.0;
        return p;
    }

    // phi(mu) = lo + (hi - lo) / (1 + exp(-slope * (mean(mu) - center))).
    static PhiSpec logistic_in_mean(double slope, double center, double lo, double hi) {
        if (!(lo >= 0.0) || !(hi >= lo))
            throw std::invalid_argument("PhiSpec::logistic_in_mean: need 0 <= lo <= hi");
        PhiSpec p;
        p.kind_ = Kind::LogisticInMean;
        p.lo_ = lo;
        p.hi_ = hi;
        p.slope_ = slope;
        p.center_ = center;
        p.lipschitz_ = 0.25 * std::fabs(slope) * (hi - lo);
        return p;
    }

    static PhiSpec custom(std::function<double(const EmpiricalMeasure&)> fn, double lo,
                          double hi, double lipschitz_d1) {
        if (!(lo >= 0.0) || !(hi >= lo))
            throw std::invalid_argument("PhiSpec::custom: need 0 <= lo <= hi");
        if (!(lipschitz_d1 >= 0.0))
            throw std::invalid_argument("PhiSpec::custom: Lipschitz constant must be >= 0");
        PhiSpec p;
        p.kind_ = Kind::Custom;
        p.fn_ = std::move(fn);
        p.lo_ = lo;
        p.hi_ = hi;
        p.lipschitz_ = lipschitz_d1;
        return p;
    }

    Kind kind() const { return kind_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double lipschitz_d1() const { return lipschitz_; }
    bool needs_full_measure() const { return kind_ == Kind::Custom; }

    // Fast path for the mean-determined kinds; the hot loop only tracks means.
    double eval_mean(double mean) const {
        switch (kind_) {
            case Kind::Constant: return lo_;
            case Kind::LogisticInMean:
                return lo_ + (hi_ - lo_) / (1.0 + std::exp(-slope_ * (mean - center_)));
            default:
                throw std::logic_error("PhiSpec::eval_mean: custom phi needs the full measure");
        }
    }

    double eval(const EmpiricalMeasure& mu) const {
        if (kind_ == Kind::Custom) return fn_(mu);
        return eval_mean(mu.mean());
    }

  private:
    PhiSpec() = default;
    Kind kind_ = Kind::Constant;
    double lo_ = 0.0, hi_ = 0.0;
    double slope_ = 0.0, center_ = 0.0;
    double lipschitz_ = 0.0;
    std::function<double(const EmpiricalMeasure&)> fn_;
};

// Volatility factor g in sigma(x) = sqrt(x) g(x): continuous, bounded,
// strictly positive. The reference model uses g = 2.
class GSpec {
  public:
    static GSpec constant(double c) {
        if (!(c > 0.0) || !std::isfinite(c))
            throw std::invalid_argument("GSpec::constant: need c > 0");
        GSpec g;
        g.inf_ = g.sup_ = c;
        return g;
    }

    static GSpec custom(std::function<double(double)> fn, double inf, double sup) {
        if (!(inf > 0.0) || !(sup >= inf) || !std::isfinite(sup))
            throw std::invalid_argument("GSpec::custom: need 0 < inf <= sup < inf()");
        GSpec g;
        g.fn_ = std::move(fn);
        g.inf_ = inf;
        g.sup_ = sup;
        return g;
    }

    bool is_constant() const { return !fn_; }
    double inf() const { return inf_; }
    double sup() const { return sup_; }
    double operator()(double x) const { return fn_ ? fn_(x) : inf_; }

  private:
    std::function<double(double)> fn_;
    double inf_ = 0.0, sup_ = 0.0;
};

// Initial law lambda with first moment m_lambda. Initial particle positions
// are deterministic (quantile-stratified for the Gamma kind), matching the
// requirement that the initial empirical measures form a deterministic
// sequence converging to lambda.
class InitialLaw {
  public:
    enum class Kind { PointMass, AtomList, GammaLaw };

    static InitialLaw point_mass(double x0) {
        if (!(x0 >= 0.0) || !std::isfinite(x0))
            throw std::invalid_argument("InitialLaw::point_mass: need x0 >= 0");
        InitialLaw l;
        l.kind_ = Kind::PointMass;
        l.x0_ = x0;
        return l;
    }

    static InitialLaw atom_list(std::vector<double> atoms) {
        InitialLaw l;
        l.kind_ = Kind::AtomList;
        l.atoms_ = EmpiricalMeasure(std::move(atoms)).atoms();
        return l;
    }

    static InitialLaw gamma_law(GammaParams params) {
        InitialLaw l;
        l.kind_ = Kind::GammaLaw;
        l.gamma_.emplace(params);
        return l;
    }

    Kind kind() const { return kind_; }

    double m_lambda() const {
        switch (kind_) {
            case Kind::PointMass: return x0_;
            case Kind::AtomList: {
                double s = 0.0;
                for (double a : atoms_) s += a;
                return s / static_cast<double>(atoms_.size());
            }
            case Kind::GammaLaw: return gamma_->mean();
        }
        return 0.0;
    }

    // Deterministic initial positions for an n-particle system.
    std::vector<double> atoms(std::size_t n) const {
        if (n == 0) throw std::invalid_argument("InitialLaw::atoms: need n >= 1");
        switch (kind_) {
            case Kind::PointMass: return std::vector<double>(n, x0_);
            case Kind::AtomList:
                if (atoms_.size() != n)
                    throw std::invalid_argument(
                        "InitialLaw::atoms: atom list size does not match particle count");
                return atoms_;
            case Kind::GammaLaw: {
                std::vector<double> a(n);
                for (std::size_t i = 0; i < n; ++i)
                    a[i] = gamma_->quantile((static_cast<double>(i) + 0.5) /
                                            static_cast<double>(n));
                return a;
            }
        }
        return {};
    }

    // Laplace transform of lambda, used as the initial value of the transform PDE.
    double laplace(double x) const {
        switch (kind_) {
            case Kind::PointMass: return std::exp(-x * x0_);
            case Kind::AtomList: {
                double s = 0.0;
                for (double a : atoms_) s += std::exp(-x * a);
                return s / static_cast<double>(atoms_.size());
            }
            case Kind::GammaLaw:
                return std::pow(1.0 + gamma_->scale * x, -gamma_->shape);
        }
        return 0.0;
    }

  private:
    InitialLaw() = default;
    Kind kind_ = Kind::PointMass;
    double x0_ = 0.0;
    std::vector<double> atoms_;
    std::optional<GammaParams> gamma_;
};

struct ModelSpec {
    double delta;
    PhiSpec phi;
    GSpec g;
    InitialLaw initial_law;

    // Optional drift override b(x, mu) with a declared Lipschitz constant.
    // When unset the mean-reversion form delta + (mean - x) phi is used.
    std::function<double(double, const EmpiricalMeasure&)> custom_drift;
    double custom_drift_lipschitz = 0.0;

    ModelSpec(double delta_, PhiSpec phi_, GSpec g_, InitialLaw law)
        : delta(delta_), phi(std::move(phi_)), g(std::move(g_)),
          initial_law(std::move(law)) {
        if (!(delta >= 0.0) || !std::isfinite(delta))
            throw std::invalid_argument("ModelSpec: delta must be finite and >= 0");
    }

    double m_lambda() const { return initial_law.m_lambda(); }

    // Lipschitz constant of the builtin drift in (x, mu) jointly: phi is
    // bounded by hi, the mean is 1-Lipschitz in d1, and the (mean - x) factor
    // couples to phi's own constant through the probed state range.
    double drift_lipschitz() const {
        if (custom_drift) return custom_drift_lipschitz;
        return phi.hi();
    }

    double drift_mean_reverting(double x, double mean, double phi_value) const {
        return delta + (mean - x) * phi_value;
    }
};

struct ValidationReport {
    std::size_t probes = 0;
    double m_lambda = 0.0;
    double min_b_at_zero = std::numeric_limits<double>::infinity();
    double phi_min = std::numeric_limits<double>::infinity();
    double phi_max = -std::numeric_limits<double>::infinity();
    double phi_lipschitz_ratio = 0.0; // max empirical estimate / declared
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();

    std::string summary() const {
        std::ostringstream os;
        os << "probes=" << probes << " m_lambda=" << m_lambda
           << " min_b(0,.)=" << min_b_at_zero << " phi in [" << phi_min << ","
           << phi_max << "] lipschitz_ratio=" << phi_lipschitz_ratio << " g in ["
           << g_min << "," << g_max << "]";
        return os.str();
    }
};

// Probes the coefficient assumptions on sampled ensembles near the initial
// law. Throws AssumptionError naming the violated assumption.
inline ValidationReport validate_assumptions(const ModelSpec& spec, std::size_t probes) {
    if (probes < 1) throw std::invalid_argument("validate_assumptions: probes >= 1");

    ValidationReport report;
    report.probes = probes;
    report.m_lambda = spec.m_lambda();
    if (!(report.m_lambda > 0.0))
        throw AssumptionError(
            "validate_assumptions: initial law must have strictly positive first "
            "moment (m_lambda > 0)");

    Rng rng(0x5eedfacedeadbeefULL, 0xa55e55ULL); // fixed probe stream
    const double scale = report.m_lambda;

    for (std::size_t p = 0; p < probes; ++p) {
        const std::size_t n = 1 + (rng.next_u64() % 64);
        std::vector<double> atoms(n);
        for (auto& a : atoms) a = scale * rng.gamma(1.0 + 3.0 * rng.uniform01());
        const EmpiricalMeasure mu(atoms);

        const double phi_mu = spec.phi.eval(mu);
        if (!std::isfinite(phi_mu) || phi_mu < 0.0)
            throw AssumptionError("validate_assumptions: phi nonnegativity violated");
        if (phi_mu < spec.phi.lo() - 1e-12 || phi_mu > spec.phi.hi() + 1e-12)
            throw AssumptionError("validate_assumptions: phi bound violated");
        report.phi_min = std::min(report.phi_min, phi_mu);
        report.phi_max = std::max(report.phi_max, phi_mu);

        const double b0 = spec.custom_drift
                              ? spec.custom_drift(0.0, mu)
                              : spec.drift_mean_reverting(0.0, mu.mean(), phi_mu);
        report.min_b_at_zero = std::min(report.min_b_at_zero, b0);
        const bool must_be_positive =
            spec.delta > 0.0 || (mu.mean() > 0.0 && phi_mu > 0.0);
        if (must_be_positive && !(b0 > 0.0))
            throw AssumptionError("validate_assumptions: drift at the origin must be "
                                  "strictly positive (b(0,.) > 0)");

        // Empirical d1-Lipschitz spot check: shift every atom by the same h,
        // which realizes d1 = |h| exactly.
        const double h = scale * (0.01 + 0.2 * rng.uniform01());
        std::vector<double> shifted = mu.atoms();
        for (auto& a : shifted) a += h;
        const double phi_shift = spec.phi.eval(EmpiricalMeasure(shifted));
        const double ratio = std::fabs(phi_shift - phi_mu) / h;
        const double declared = spec.phi.lipschitz_d1();
        if (declared > 0.0)
            report.phi_lipschitz_ratio = std::max(report.phi_lipschitz_ratio, ratio / declared);
        else if (ratio > 1e-9)
            throw AssumptionError(
                "validate_assumptions: phi declared constant but varies with the measure");
        if (declared > 0.0 && ratio > declared * (1.0 + 1e-6) + 1e-12)
            throw AssumptionError(
                "validate_assumptions: phi Lipschitz bound violated on probe ensembles");
    }

    for (int i = 0; i <= 200; ++i) {
        const double x = scale * 4.0 * static_cast<double>(i) / 200.0;
        const double gx = spec.g(x);
        if (!std::isfinite(gx) || !(gx > 0.0))
            throw AssumptionError(
                "validate_assumptions: g must take strictly positive finite values");
        if (gx < spec.g.inf() - 1e-12 || gx > spec.g.sup() + 1e-12)
            throw AssumptionError("validate_assumptions: g bound violated");
        report.g_min = std::min(report.g_min, gx);
        report.g_max = std::max(report.g_max, gx);
    }

    return report;
}

} // namespace mfbesq
