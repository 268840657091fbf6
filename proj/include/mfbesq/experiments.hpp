#pragma once

// Experiment runner behind the command-line tool: flat key=value configs, one
// experiment kind per invocation, CSV artifacts plus a reproducibility
// manifest. Config lines in the manifest parse back into the same experiment,
// so a run can be reproduced byte for byte from its manifest.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfbesq/analytics.hpp"
#include "mfbesq/errors.hpp"
#include "mfbesq/ldp.hpp"
#include "mfbesq/mckean_vlasov.hpp"
#include "mfbesq/measures.hpp"
#include "mfbesq/model.hpp"
#include "mfbesq/parallel.hpp"
#include "mfbesq/particles.hpp"

namespace mfbesq {

inline const char* version_string() { return "0.1.0"; }

// ------------------------------------------------------------------------
// Config handling
// ------------------------------------------------------------------------

class ExperimentConfig {
  public:
    std::string kind;

    void set(const std::string& key, const std::string& value) {
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string take(const std::string& key, const std::string& fallback) const {
        consumed_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double take_real(const std::string& key, double fallback) const {
        const std::string s = take(key, "");
        if (s.empty()) return fallback;
        return parse_real(key, s);
    }

    std::uint64_t take_count(const std::string& key, std::uint64_t fallback) const {
        const std::string s = take(key, "");
        if (s.empty()) return fallback;
        std::size_t pos = 0;
        std::uint64_t v = 0;
        try {
            v = std::stoull(s, &pos);
        } catch (...) {
            throw std::invalid_argument("config: key '" + key + "' is not a count: " + s);
        }
        if (pos != s.size())
            throw std::invalid_argument("config: key '" + key + "' is not a count: " + s);
        return v;
    }

    std::vector<double> take_list(const std::string& key, const std::string& fallback) const {
        const std::string s = take(key, fallback);
        std::vector<double> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ';'))
            if (!item.empty()) out.push_back(parse_real(key, item));
        if (out.empty())
            throw std::invalid_argument("config: key '" + key + "' needs a ';' list");
        return out;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : values_)
            if (!consumed_.count(key))
                throw std::invalid_argument("config: unknown key '" + key + "'");
    }

    const std::map<std::string, std::string>& values() const { return values_; }

  private:
    static double parse_real(const std::string& key, const std::string& s) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (...) {
            throw std::invalid_argument("config: key '" + key + "' is not a number: " + s);
        }
        if (pos != s.size())
            throw std::invalid_argument("config: key '" + key + "' is not a number: " + s);
        return v;
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> consumed_;
};

inline void apply_config_token(ExperimentConfig& cfg, const std::string& token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("config: expected key=value, got '" + token + "'");
    cfg.set(token.substr(0, eq), token.substr(eq + 1));
}

// Line-oriented config file: key=value per line, '#' starts a comment.
inline void load_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open file " + path);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r' ||
                                 line.back() == '\t'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        apply_config_token(cfg, line.substr(start));
    }
}

// phi=const:C | logistic:slope,center,lo,hi
inline PhiSpec parse_phi(const std::string& s) {
    const auto colon = s.find(':');
    const std::string head = s.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : s.substr(colon + 1);
    std::vector<double> a;
    std::stringstream ss(args);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) a.push_back(std::stod(item));
    if (head == "const" && a.size() == 1) return PhiSpec::constant(a[0]);
    if (head == "logistic" && a.size() == 4)
        return PhiSpec::logistic_in_mean(a[0], a[1], a[2], a[3]);
    throw std::invalid_argument("config: bad phi spec '" + s +
                                "' (use const:C or logistic:slope,center,lo,hi)");
}

// g=const:C
inline GSpec parse_g(const std::string& s) {
    if (s.rfind("const:", 0) == 0) return GSpec::constant(std::stod(s.substr(6)));
    throw std::invalid_argument("config: bad g spec '" + s + "' (use const:C)");
}

// lambda=point:X0 | gamma:scale,shape | atoms:a;b;c
inline InitialLaw parse_lambda(const std::string& s) {
    if (s.rfind("point:", 0) == 0) return InitialLaw::point_mass(std::stod(s.substr(6)));
    if (s.rfind("gamma:", 0) == 0) {
        const std::string args = s.substr(6);
        const auto comma = args.find(',');
        if (comma != std::string::npos)
            return InitialLaw::gamma_law(GammaParams(std::stod(args.substr(0, comma)),
                                                     std::stod(args.substr(comma + 1))));
    }
    if (s.rfind("atoms:", 0) == 0) {
        std::vector<double> atoms;
        std::stringstream ss(s.substr(6));
        std::string item;
        while (std::getline(ss, item, ';'))
            if (!item.empty()) atoms.push_back(std::stod(item));
        return InitialLaw::atom_list(std::move(atoms));
    }
    throw std::invalid_argument("config: bad lambda spec '" + s +
                                "' (use point:X0, gamma:scale,shape or atoms:a;b;c)");
}

// ------------------------------------------------------------------------
// Shared experiment helpers (also exercised by the acceptance suite)
// ------------------------------------------------------------------------

struct ChaosResult {
    std::vector<std::size_t> ns;
    std::vector<double> corr; // pooled disjoint-pair correlation of terminal states
};

// Sample correlation of tagged terminal pairs (X_1(T), X_2(T)), pooled over
// disjoint pairs of the exchangeable system and over replicas.
inline ChaosResult chaos_experiment(const ModelSpec& spec,
                                    const std::vector<std::size_t>& n_list,
                                    std::size_t replicas, const SchemeConfig& cfg,
                                    double T, int threads = 1) {
    ChaosResult result;
    result.ns = n_list;
    const auto steps = static_cast<std::size_t>(std::llround(T / cfg.dt));
    for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
        const std::size_t n = n_list[idx];
        if (n < 2)
            throw std::invalid_argument("chaos_experiment: need n >= 2 for tagged pairs");
        const std::size_t pairs = n / 2;
        std::vector<double> sx(replicas, 0.0), sxx(replicas, 0.0), sxy(replicas, 0.0);
        parallel_for(replicas, threads, [&](std::size_t r) {
            const SchemeConfig rc =
                cfg.with_stream(cfg.stream_id + (idx + 1) * 7000003ULL + r);
            const SystemTrajectory traj = simulate(n, spec, rc, T, steps);
            const double* terminal = traj.row(traj.grid.size() - 1);
            double a = 0.0, aa = 0.0, ab = 0.0;
            for (std::size_t p = 0; p < pairs; ++p) {
                const double u = terminal[2 * p];
                const double v = terminal[2 * p + 1];
                a += u + v;
                aa += u * u + v * v;
                ab += u * v;
            }
            sx[r] = a;
            sxx[r] = aa;
            sxy[r] = ab;
        });
        double sum = 0.0, sum_sq = 0.0, sum_prod = 0.0;
        for (std::size_t r = 0; r < replicas; ++r) {
            sum += sx[r];
            sum_sq += sxx[r];
            sum_prod += sxy[r];
        }
        const double m = static_cast<double>(2 * pairs * replicas);
        const double mean = sum / m;
        const double var = sum_sq / m - mean * mean;
        const double cov = sum_prod / (0.5 * m) - mean * mean;
        result.corr.push_back(var > 0.0 ? cov / var : 0.0);
    }
    return result;
}

// Uniform-in-time d1 distance between the n-particle measure path and a
// quantile projection of a large reference ensemble onto n atoms.
inline std::vector<double> lln_distances(const ModelSpec& spec,
                                         const std::vector<std::size_t>& n_list,
                                         std::size_t n_reference,
                                         const SchemeConfig& cfg, double T,
                                         std::size_t record_stride) {
    const SystemTrajectory ref =
        simulate(n_reference, spec, cfg.with_stream(cfg.stream_id + 555000111ULL), T,
                 record_stride);
    const MeasurePath ref_path = ref.measure_path();

    std::vector<double> distances;
    for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
        const std::size_t n = n_list[idx];
        const SystemTrajectory traj =
            simulate(n, spec, cfg.with_stream(cfg.stream_id + idx), T, record_stride);
        // Project every reference measure to n atoms via its quantiles so the
        // same-n optimal coupling applies.
        std::vector<EmpiricalMeasure> projected;
        projected.reserve(ref_path.measures.size());
        for (const auto& m : ref_path.measures) {
            std::vector<double> atoms(n);
            for (std::size_t i = 0; i < n; ++i)
                atoms[i] = m.quantile((static_cast<double>(i) + 0.5) /
                                      static_cast<double>(n));
            projected.emplace_back(std::move(atoms));
        }
        distances.push_back(path_distance(
            traj.measure_path(), MeasurePath(ref_path.grid, std::move(projected))));
    }
    return distances;
}

// ------------------------------------------------------------------------
// Experiment runner
// ------------------------------------------------------------------------

struct RunResult {
    std::vector<std::string> artifacts; // file names written into out_dir
    std::string summary;                // one-line human summary
};

namespace detail {

inline ModelSpec model_from_config(const ExperimentConfig& cfg) {
    ModelSpec spec(cfg.take_real("delta", 0.0), parse_phi(cfg.take("phi", "const:1")),
                   parse_g(cfg.take("g", "const:2")),
                   parse_lambda(cfg.take("lambda", "point:1")));
    return spec;
}

inline SchemeConfig scheme_from_config(const ExperimentConfig& cfg) {
    return SchemeConfig(cfg.take_real("dt", 1e-3), cfg.take_count("seed", 1),
                        cfg.take_count("stream", 0));
}

inline std::ofstream open_artifact(const std::filesystem::path& dir,
                                   const std::string& name,
                                   std::vector<std::string>& artifacts) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw NumericalError("cannot open output file " + (dir / name).string());
    artifacts.push_back(name);
    return os;
}

} // namespace detail

// Runs one experiment, writes artifacts plus manifest.txt into out_dir.
// Throws AssumptionError / std::invalid_argument for invalid configurations
// and NumericalError for numerical failures; the CLI maps these to exit codes.
inline RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                int threads = 1) {
    const auto t_start = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    RunResult result;
    std::ostringstream summary;

    if (cfg.kind == "simulate") {
        const ModelSpec spec = detail::model_from_config(cfg);
        const SchemeConfig sc = detail::scheme_from_config(cfg);
        const auto n = static_cast<std::size_t>(cfg.take_count("n", 1000));
        const double T = cfg.take_real("T", 1.0);
        const auto stride = static_cast<std::size_t>(cfg.take_count("snapshot_stride", 1));
        const bool dump = cfg.take_count("dump", 0) != 0;
        cfg.reject_unknown();
        validate_assumptions(spec, 64);
        const SystemTrajectory traj = simulate(n, spec, sc, T, stride);
        { auto os = detail::open_artifact(dir, "summary.csv", result.artifacts);
          write_measure_path_csv(os, traj.measure_path()); }
        if (dump) { auto os = detail::open_artifact(dir, "trajectory.csv", result.artifacts);
                    write_trajectory_csv(os, traj); }
        summary << "terminal_mean=" << fmt9(traj.terminal_mean())
                << " terminal_sum=" << fmt9(traj.terminal_sum());
    } else if (cfg.kind == "mkv") {
        const ModelSpec spec = detail::model_from_config(cfg);
        const SchemeConfig sc = detail::scheme_from_config(cfg);
        const auto N = static_cast<std::size_t>(cfg.take_count("N", 2000));
        const double T = cfg.take_real("T", 1.0);
        const auto stride = static_cast<std::size_t>(cfg.take_count("snapshot_stride", 1));
        const std::string solver = cfg.take("solver", "selfconsistent");
        const double tol = cfg.take_real("tol", 0.01);
        const auto max_iter = static_cast<std::size_t>(cfg.take_count("max_iter", 20));
        cfg.reject_unknown();
        validate_assumptions(spec, 64);
        LawPath law = (solver == "picard")
                          ? picard_iterate(spec, N, sc, T, tol, max_iter, stride).law
                          : solve_selfconsistent(spec, N, sc, T, stride);
        { auto os = detail::open_artifact(dir, "law.csv", result.artifacts);
          write_law_path_csv(os, law); }
        summary << "solver=" << solver << " terminal_mean=" << fmt9(law.mean_path.back())
                << " terminal_var=" << fmt9(law.var_path.back());
    } else if (cfg.kind == "variance") {
        const ModelSpec spec = detail::model_from_config(cfg);
        const SchemeConfig sc = detail::scheme_from_config(cfg);
        const auto N = static_cast<std::size_t>(cfg.take_count("N", 5000));
        const double T = cfg.take_real("T", 2.0);
        const auto stride = static_cast<std::size_t>(cfg.take_count("snapshot_stride", 1));
        cfg.reject_unknown();
        validate_assumptions(spec, 64);
        const LawPath law = solve_selfconsistent(spec, N, sc, T, stride);
        const std::vector<double> closed =
            variance_closed_form(law.phi_path, spec.m_lambda(), law.grid);
        const std::vector<double> ode = variance_ode(law.phi_path, spec.m_lambda(), law.grid);
        { auto os = detail::open_artifact(dir, "variance.csv", result.artifacts);
          os << "t,var_emp,var_closed,var_ode\n";
          for (std::size_t k = 0; k < law.grid.size(); ++k) {
              const double row[4] = {law.grid[k], law.var_path[k], closed[k], ode[k]};
              csv_row(os, row, 4);
          } }
        const auto tstar = monotonicity_time(law.phi_path, spec.m_lambda(), law.grid);
        summary << "tstar=" << (tstar ? fmt9(*tstar) : std::string("none"));
    } else if (cfg.kind == "stationary") {
        const ModelSpec spec = detail::model_from_config(cfg);
        const double tol = cfg.take_real("tol", 1e-10);
        const auto max_iter = static_cast<std::size_t>(cfg.take_count("max_iter", 200));
        const auto longrun = cfg.take_count("longrun", 0);
        const SchemeConfig sc = detail::scheme_from_config(cfg);
        const auto N = static_cast<std::size_t>(cfg.take_count("N", 5000));
        const double T = cfg.take_real("T", 50.0);
        cfg.reject_unknown();
        validate_assumptions(spec, 64);
        const FixedPointResult fp =
            stationary_fixed_point(spec.phi, spec.m_lambda(), tol, max_iter);
        summary << "phi_star=" << fmt9(fp.phi_star) << " scale=" << fmt9(fp.stationary.scale)
                << " shape=" << fmt9(fp.stationary.shape);
        if (longrun) {
            const auto steps = static_cast<std::size_t>(std::llround(T / sc.dt));
            const LawPath law = solve_selfconsistent(spec, N, sc, T, steps);
            const double ks = ks_statistic(law.measures.back(), fp.stationary);
            summary << " longrun_ks=" << fmt9(ks);
        }
    } else if (cfg.kind == "laplace") {
        const ModelSpec spec = detail::model_from_config(cfg);
        const SchemeConfig sc = detail::scheme_from_config(cfg);
        const auto N = static_cast<std::size_t>(cfg.take_count("N", 5000));
        const std::vector<double> ts = cfg.take_list("ts", "0.5;1");
        const std::vector<double> xs = cfg.take_list("xs", "0.5;1;2");
        const double dt_char = cfg.take_real("dt_char", 1e-4);
        cfg.reject_unknown();
        validate_assumptions(spec, 64);
        double horizon = 0.0;
        for (double t : ts) horizon = std::max(horizon, t);
        const auto steps = static_cast<std::size_t>(std::llround(horizon / sc.dt));
        std::size_t stride = 1;
        for (std::size_t s = 1; s <= steps; ++s)
            if (steps % s == 0) { stride = s; if (steps / s <= 512) break; }
        const SystemTrajectory traj = simulate(N, spec, sc, horizon, stride);
        const LawPath law = detail::law_path_from_trajectory(traj);
        const std::vector<double>& phi_dense = traj.phi_dense;
        LaplaceGrid grid;
        grid.ts = ts;
        grid.xs = xs;
        const auto u0 = [&spec](double x) { return spec.initial_law.laplace(x); };
        for (double t : ts)
            for (double x : xs) {
                const double u_pde =
                    laplace_pde_solve(phi_dense, sc.dt, spec.m_lambda(), u0, t, x, dt_char);
                const auto node = law.node_at(t);
                double mc = 0.0;
                for (double atom : law.measures[node].atoms())
                    mc += std::exp(-x * atom);
                mc /= static_cast<double>(law.measures[node].size());
                grid.u_pde.push_back(u_pde);
                grid.u_mc.push_back(mc);
                grid.abs_err.push_back(std::fabs(u_pde - mc));
            }
        { auto os = detail::open_artifact(dir, "laplace.csv", result.artifacts);
          write_laplace_grid_csv(os, grid); }
        double max_err = 0.0;
        for (double e : grid.abs_err) max_err = std::max(max_err, e);
        summary << "max_abs_err=" << fmt9(max_err);
    } else if (cfg.kind == "boundary") {
        const double m_lambda = cfg.take_real("m_lambda", 1.0);
        const double phi_inf = cfg.take_real("phi_inf", 0.0);
        const double phi_sup = cfg.take_real("phi_sup", 0.0);
        cfg.reject_unknown();
        const BoundaryClassification c = classify_boundary(m_lambda, phi_inf, phi_sup);
        summary << to_string(c.cls) << " product_inf=" << fmt9(c.product_inf)
                << " product_sup=" << fmt9(c.product_sup);
    } else if (cfg.kind == "ldp") {
        const ModelSpec spec = detail::model_from_config(cfg);
        const SchemeConfig sc = detail::scheme_from_config(cfg);
        const double T = cfg.take_real("T", 1.0);
        const double a = cfg.take_real("a", spec.m_lambda() + spec.delta * T + 0.3);
        const std::string event_name = cfg.take("event", "terminal_above");
        const auto replicas = static_cast<std::size_t>(cfg.take_count("replicas", 2000));
        const std::vector<double> n_reals = cfg.take_list("n_list", "50;100;200");
        double control_u = cfg.take_real("control_u", -1.0);
        cfg.reject_unknown();
        validate_assumptions(spec, 64);
        RareEvent event = event_name == "terminal_below"
                              ? RareEvent::terminal_mean_below(a)
                              : (event_name == "path_sup_above"
                                     ? RareEvent::path_sup_above(a)
                                     : RareEvent::terminal_mean_above(a));
        std::vector<std::size_t> n_list;
        for (double v : n_reals) n_list.push_back(static_cast<std::size_t>(std::llround(v)));
        if (control_u < 0.0) {
            std::vector<double> u_grid;
            for (int i = 0; i <= 40; ++i) u_grid.push_back(0.025 * i);
            control_u =
                constant_control_search(event, spec, T, u_grid, sc).u_best;
        }
        const RateReport report =
            rate_fit(event, spec, sc, T, n_list, replicas, control_u, threads);
        { auto os = detail::open_artifact(dir, "rate.csv", result.artifacts);
          write_rate_report_csv(os, report); }
        summary << "control_u=" << fmt9(report.control_u)
                << " spread=" << fmt9(report.last_two_relative_spread);
    } else if (cfg.kind == "chaos") {
        const ModelSpec spec = detail::model_from_config(cfg);
        const SchemeConfig sc = detail::scheme_from_config(cfg);
        const double T = cfg.take_real("T", 1.0);
        const auto replicas = static_cast<std::size_t>(cfg.take_count("replicas", 2000));
        const std::vector<double> n_reals = cfg.take_list("n_list", "100;400;1600");
        cfg.reject_unknown();
        validate_assumptions(spec, 64);
        std::vector<std::size_t> n_list;
        for (double v : n_reals) n_list.push_back(static_cast<std::size_t>(std::llround(v)));
        const ChaosResult chaos = chaos_experiment(spec, n_list, replicas, sc, T, threads);
        { auto os = detail::open_artifact(dir, "chaos.csv", result.artifacts);
          os << "n,corr\n";
          for (std::size_t i = 0; i < chaos.ns.size(); ++i)
              os << chaos.ns[i] << ',' << fmt9(chaos.corr[i]) << '\n'; }
        summary << "corr_last=" << fmt9(chaos.corr.back());
    } else {
        throw std::invalid_argument("unknown experiment kind '" + cfg.kind + "'");
    }

    const auto t_end = std::chrono::steady_clock::now();
    const double wall =
        std::chrono::duration_cast<std::chrono::duration<double>>(t_end - t_start).count();

    // Manifest: config echo first (parseable as a config file), metadata after.
    {
        std::ofstream os(dir / "manifest.txt", std::ios::binary);
        os << "# mfbesq run manifest\n";
        os << "# kind=" << cfg.kind << " (rerun: mfbesq " << cfg.kind
           << " --config manifest.txt)\n";
        for (const auto& [key, value] : cfg.values()) os << key << '=' << value << '\n';
        os << "# version=" << version_string() << '\n';
        os << "# wall_seconds=" << fmt9(wall) << '\n';
        os << "# summary " << summary.str() << '\n';
        for (const auto& a : result.artifacts) os << "# artifact=" << a << '\n';
    }
    result.artifacts.push_back("manifest.txt");
    result.summary = summary.str();
    return result;
}

} // namespace mfbesq
