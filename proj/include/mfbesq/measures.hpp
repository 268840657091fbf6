#pragma once

// Empirical measures on [0, inf): uniform-weight atom sets, the exact 1-D
// Wasserstein-1 distance between equal-size ensembles, moments, measure-path
// distances and a Kolmogorov-Smirnov statistic against Gamma targets.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <utility>
#include <vector>

#include "mfbesq/csv.hpp"
#include "mfbesq/errors.hpp"
#include "mfbesq/special.hpp"

namespace mfbesq {

// Stationary Gamma law parameters: scale > 0 (reserve units), shape > 0.
struct GammaParams {
    double scale;
    double shape;

    GammaParams(double scale_, double shape_) : scale(scale_), shape(shape_) {
        if (!(scale > 0.0) || !std::isfinite(scale))
            throw std::invalid_argument("GammaParams: scale must be positive");
        if (!(shape > 0.0) || !std::isfinite(shape))
            throw std::invalid_argument("GammaParams: shape must be positive");
    }

    double mean() const { return scale * shape; }
    double variance() const { return scale * scale * shape; }
    double cdf(double x) const { return gamma_cdf(x, shape, scale); }
    double quantile(double p) const { return gamma_quantile(p, shape, scale); }
};

// Uniform-weight atom set on [0, inf), stored sorted ascending. Immutable
// after construction; safe to share across threads.
class EmpiricalMeasure {
  public:
    explicit EmpiricalMeasure(std::vector<double> atoms) : atoms_(std::move(atoms)) {
        if (atoms_.empty())
            throw std::invalid_argument("EmpiricalMeasure: needs at least one atom");
        for (double a : atoms_) {
            if (!std::isfinite(a))
                throw std::invalid_argument("EmpiricalMeasure: atoms must be finite");
            if (a < 0.0)
                throw std::invalid_argument("EmpiricalMeasure: atoms must be >= 0");
        }
        std::sort(atoms_.begin(), atoms_.end());
    }

    // Deterministic n-point quantile discretization of a Gamma law.
    static EmpiricalMeasure from_gamma_quantiles(const GammaParams& g, std::size_t n) {
        std::vector<double> atoms(n);
        for (std::size_t i = 0; i < n; ++i)
            atoms[i] = g.quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
        return EmpiricalMeasure(std::move(atoms));
    }

    std::size_t size() const { return atoms_.size(); }
    const std::vector<double>& atoms() const { return atoms_; }

    double mean() const {
        double s = 0.0;
        for (double a : atoms_) s += a;
        return s / static_cast<double>(atoms_.size());
    }

    double variance() const {
        const double m = mean();
        double s = 0.0;
        for (double a : atoms_) s += (a - m) * (a - m);
        return s / static_cast<double>(atoms_.size());
    }

    // Left-continuous empirical quantile.
    double quantile(double p) const {
        const double n = static_cast<double>(atoms_.size());
        auto idx = static_cast<std::ptrdiff_t>(std::ceil(p * n)) - 1;
        if (idx < 0) idx = 0;
        if (idx >= static_cast<std::ptrdiff_t>(atoms_.size()))
            idx = static_cast<std::ptrdiff_t>(atoms_.size()) - 1;
        return atoms_[static_cast<std::size_t>(idx)];
    }

  private:
    std::vector<double> atoms_;
};

// p-th moment (1/n) sum x_i^p, p > 0.
inline double moment(const EmpiricalMeasure& mu, double p) {
    if (!(p > 0.0)) throw std::invalid_argument("moment: order p must be positive");
    double s = 0.0;
    for (double a : mu.atoms()) s += std::pow(a, p);
    return s / static_cast<double>(mu.size());
}

// Exact Wasserstein-1 distance between two same-size uniform atom sets: the
// optimal coupling in 1-D pairs order statistics, so the distance is the mean
// absolute difference of sorted atoms. O(n) on the stored sorted lists.
inline double wasserstein1(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.size() != nu.size())
        throw std::invalid_argument("wasserstein1: incomparable measures (atom counts differ)");
    const auto& x = mu.atoms();
    const auto& y = nu.atoms();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(x[i] - y[i]);
    return s / static_cast<double>(x.size());
}

// One measure per grid node; grid starts at 0 and ends at the horizon.
struct MeasurePath {
    std::vector<double> grid;
    std::vector<EmpiricalMeasure> measures;

    MeasurePath(std::vector<double> grid_, std::vector<EmpiricalMeasure> measures_)
        : grid(std::move(grid_)), measures(std::move(measures_)) {
        if (grid.empty() || grid.size() != measures.size())
            throw std::invalid_argument("MeasurePath: one measure per grid node required");
        if (grid.front() != 0.0)
            throw std::invalid_argument("MeasurePath: grid must start at 0");
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1]))
                throw std::invalid_argument("MeasurePath: grid must be strictly increasing");
        for (const auto& m : measures)
            if (m.size() != measures.front().size())
                throw std::invalid_argument("MeasurePath: all measures must share n");
    }
};

// Uniform distance of two measure paths: sup over grid nodes of d1.
inline double path_distance(const MeasurePath& a, const MeasurePath& b) {
    if (a.grid.size() != b.grid.size())
        throw std::invalid_argument("path_distance: grid mismatch");
    for (std::size_t i = 0; i < a.grid.size(); ++i)
        if (a.grid[i] != b.grid[i])
            throw std::invalid_argument("path_distance: grid mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.measures.size(); ++i)
        d = std::max(d, wasserstein1(a.measures[i], b.measures[i]));
    return d;
}

// Kolmogorov-Smirnov statistic of an empirical measure against a Gamma law:
// sup_x |F_emp(x) - F_Gamma(x)|, evaluated at the atoms.
inline double ks_statistic(const EmpiricalMeasure& mu, const GammaParams& target) {
    const auto& x = mu.atoms();
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = target.cdf(x[i]);
        d = std::max(d, std::max(f - static_cast<double>(i) / n,
                                 static_cast<double>(i + 1) / n - f));
    }
    return d;
}

// Two-sample KS statistic; used by tests that compare a simulated ensemble
// with draws from an exact sampler.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i; else ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na -
                                  static_cast<double>(j) / nb));
    }
    return d;
}

// CSV emitter: t,q01,q05,q25,q50,q75,q95,q99,mean,var with one row per node.
inline void write_measure_path_csv(std::ostream& os, const MeasurePath& path) {
    os << "t,q01,q05,q25,q50,q75,q95,q99,mean,var\n";
    for (std::size_t k = 0; k < path.grid.size(); ++k) {
        const auto& m = path.measures[k];
        const double row[10] = {path.grid[k],      m.quantile(0.01), m.quantile(0.05),
                                m.quantile(0.25),  m.quantile(0.50), m.quantile(0.75),
                                m.quantile(0.95),  m.quantile(0.99), m.mean(),
                                m.variance()};
        csv_row(os, row, 10);
    }
}

} // namespace mfbesq
