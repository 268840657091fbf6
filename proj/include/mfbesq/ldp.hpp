#pragma once

// Large-deviation cost accounting and rare-event estimation: the controlled
// limit dynamics, exact quadratic costs (1/2) int u^2 for explicit controls,
// Girsanov importance sampling of empirical-measure events, and empirical
// decay-rate fits -(1/n) log p_n against the constant-control cost bound.

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "mfbesq/csv.hpp"
#include "mfbesq/errors.hpp"
#include "mfbesq/mckean_vlasov.hpp"
#include "mfbesq/model.hpp"
#include "mfbesq/parallel.hpp"
#include "mfbesq/particles.hpp"

namespace mfbesq {

// Measurable functionals of the empirical-measure path, all acting on the
// mean flow t -> mean(rho^n(t)).
struct RareEvent {
    enum class Kind { TerminalMeanAbove, TerminalMeanBelow, PathSupAbove };
    Kind kind;
    double threshold;

    static RareEvent terminal_mean_above(double a) { return {Kind::TerminalMeanAbove, a}; }
    static RareEvent terminal_mean_below(double a) { return {Kind::TerminalMeanBelow, a}; }
    static RareEvent path_sup_above(double a) { return {Kind::PathSupAbove, a}; }

    bool occurs(const SystemTrajectory& traj) const {
        switch (kind) {
            case Kind::TerminalMeanAbove: return traj.terminal_mean() > threshold;
            case Kind::TerminalMeanBelow: return traj.terminal_mean() < threshold;
            case Kind::PathSupAbove: return traj.sup_mean() > threshold;
        }
        return false;
    }

    // The same functional on a deterministic mean flow.
    bool occurs_on_mean_flow(const std::vector<double>& mean_path) const {
        switch (kind) {
            case Kind::TerminalMeanAbove: return mean_path.back() > threshold;
            case Kind::TerminalMeanBelow: return mean_path.back() < threshold;
            case Kind::PathSupAbove: {
                double s = mean_path.front();
                for (double m : mean_path) s = std::max(s, m);
                return s > threshold;
            }
        }
        return false;
    }

    std::string name() const {
        switch (kind) {
            case Kind::TerminalMeanAbove: return "TerminalMeanAbove";
            case Kind::TerminalMeanBelow: return "TerminalMeanBelow";
            case Kind::PathSupAbove: return "PathSupAbove";
        }
        return "?";
    }
};

// Tilted self-consistent ensemble for the controlled limit SDE with a
// deterministic time control u(t). With u = 0 this coincides bit for bit with
// solve_selfconsistent.
inline LawPath simulate_controlled_limit(const ModelSpec& spec,
                                         const std::function<double(double)>& u,
                                         std::size_t N, const SchemeConfig& cfg,
                                         double T, std::size_t record_stride = 1) {
    const auto steps = static_cast<std::size_t>(std::llround(T / cfg.dt));
    if (record_stride < 1 || steps % record_stride != 0)
        throw std::invalid_argument(
            "simulate_controlled_limit: record_stride must divide the step count");
    ControlSpec ctrl = u ? ControlSpec::of_time(u) : ControlSpec::zero();
    return detail::law_path_from_trajectory(
        simulate_controlled(N, spec, cfg, T, ctrl, record_stride).trajectory);
}

struct ISResult {
    double p_hat = 0.0;
    double stderr_ = 0.0;
    double ess = 0.0;     // effective sample size of the Girsanov weights
    std::size_t hits = 0; // replicas where the event occurred
    bool low_ess_warning = false;
};

// Unbiased probability estimate p = E[1{event} exp(log_weight)] over
// independent tilted replicas (stream_id = base + replica). With a zero
// control this reduces exactly to plain Monte Carlo.
inline ISResult importance_sampling(const RareEvent& event, std::size_t n,
                                    const ModelSpec& spec, const SchemeConfig& cfg,
                                    double T, const ControlSpec& ctrl,
                                    std::size_t replicas, int threads = 1) {
    if (replicas < 100)
        throw std::invalid_argument("importance_sampling: need replicas >= 100");

    std::vector<double> weighted(replicas, 0.0);
    std::vector<double> weights(replicas, 0.0);
    std::vector<char> hit(replicas, 0);
    parallel_for(replicas, threads, [&](std::size_t r) {
        const SchemeConfig rc = cfg.with_stream(cfg.stream_id + r);
        // Sparse recording: the event functionals only need the dense mean flow.
        const auto run = simulate_controlled(n, spec, rc, T, ctrl,
                                             std::max<std::size_t>(1, static_cast<std::size_t>(
                                                 std::llround(T / rc.dt))));
        const double w = std::exp(run.log_weight);
        weights[r] = w;
        if (event.occurs(run.trajectory)) {
            hit[r] = 1;
            weighted[r] = w;
        }
    });

    ISResult res;
    double sum = 0.0, sum_sq = 0.0, wsum = 0.0, wsum_sq = 0.0;
    for (std::size_t r = 0; r < replicas; ++r) {
        sum += weighted[r];
        sum_sq += weighted[r] * weighted[r];
        wsum += weights[r];
        wsum_sq += weights[r] * weights[r];
        res.hits += hit[r];
    }
    const double m = static_cast<double>(replicas);
    res.p_hat = sum / m;
    const double var = std::max(0.0, sum_sq / m - res.p_hat * res.p_hat);
    res.stderr_ = std::sqrt(var / m);
    res.ess = wsum_sq > 0.0 ? wsum * wsum / wsum_sq : 0.0;
    res.low_ess_warning = res.ess < 10.0;
    return res;
}

struct ControlSearchResult {
    double u_best = 0.0;
    double cost_best = 0.0; // u^2 T / 2
};

// Smallest-cost constant control whose controlled limit mean flow realizes the
// event; the flow is approximated by a moderate tilted ensemble. An upper
// bound on the rate: steering the whole population costs u^2 T / 2.
inline ControlSearchResult constant_control_search(const RareEvent& event,
                                                   const ModelSpec& spec, double T,
                                                   const std::vector<double>& u_grid,
                                                   const SchemeConfig& cfg,
                                                   std::size_t N = 2000) {
    if (u_grid.empty())
        throw std::invalid_argument("constant_control_search: empty control grid");
    std::vector<double> grid = u_grid;
    std::sort(grid.begin(), grid.end(),
              [](double a, double b) { return std::fabs(a) < std::fabs(b); });
    const std::size_t stride = static_cast<std::size_t>(std::llround(T / cfg.dt));
    for (double u : grid) {
        // Controlled limit ensemble; the event functional reads its dense mean flow.
        const auto run =
            simulate_controlled(N, spec, cfg, T, ControlSpec::constant(u), stride);
        if (event.occurs_on_mean_flow(run.trajectory.mean_dense))
            return {u, 0.5 * u * u * T};
    }
    throw NumericalError("constant_control_search: event unreachable on grid");
}

struct RateReport {
    std::vector<std::size_t> ns;
    std::vector<double> p_hat;
    std::vector<double> stderr_;
    std::vector<double> rate; // -(1/n) log p_hat
    double control_u = 0.0;
    double control_cost = 0.0;
    double last_two_relative_spread = 0.0;
    double ls_rate = 0.0; // least-squares slope of -log p_hat against n
};

// Per-n probability estimates (importance-sampling assisted) and the scaled
// decay sequence -(1/n) log p_n, with a stabilization diagnostic on the last
// two entries.
inline RateReport rate_fit(const RareEvent& event, const ModelSpec& spec,
                           const SchemeConfig& cfg, double T,
                           const std::vector<std::size_t>& n_list,
                           std::size_t replicas, double control_u = 0.0,
                           int threads = 1) {
    if (n_list.size() < 3)
        throw std::invalid_argument("rate_fit: need at least 3 system sizes");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1])
            throw std::invalid_argument("rate_fit: n_list must be increasing");

    RateReport report;
    report.ns = n_list;
    report.control_u = control_u;
    report.control_cost = 0.5 * control_u * control_u * T;
    const ControlSpec ctrl =
        control_u == 0.0 ? ControlSpec::zero() : ControlSpec::constant(control_u);

    for (std::size_t i = 0; i < n_list.size(); ++i) {
        // Separate base streams per system size keep replicas independent.
        const SchemeConfig nc = cfg.with_stream(cfg.stream_id + (i + 1) * 1000003ULL);
        const ISResult is = importance_sampling(event, n_list[i], spec, nc, T, ctrl,
                                                replicas, threads);
        if (is.hits == 0)
            throw NumericalError("rate_fit: no hits at n = " + std::to_string(n_list[i]) +
                                 "; increase replicas or control");
        report.p_hat.push_back(is.p_hat);
        report.stderr_.push_back(is.stderr_);
        report.rate.push_back(-std::log(is.p_hat) / static_cast<double>(n_list[i]));
    }
    const double a = report.rate[report.rate.size() - 2];
    const double b = report.rate.back();
    report.last_two_relative_spread = std::fabs(a - b) / std::max(std::fabs(b), 1e-300);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        const double nn = static_cast<double>(n_list[i]);
        num += nn * -std::log(report.p_hat[i]);
        den += nn * nn;
    }
    report.ls_rate = num / den;
    return report;
}

// RateReport CSV: n,p_hat,stderr,neg_log_p_over_n,control,cost.
inline void write_rate_report_csv(std::ostream& os, const RateReport& report) {
    os << "n,p_hat,stderr,neg_log_p_over_n,control,cost\n";
    for (std::size_t i = 0; i < report.ns.size(); ++i) {
        os << report.ns[i] << ',' << fmt9(report.p_hat[i]) << ','
           << fmt9(report.stderr_[i]) << ',' << fmt9(report.rate[i]) << ','
           << fmt9(report.control_u) << ',' << fmt9(report.control_cost) << '\n';
    }
}

} // namespace mfbesq
