#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rclab/adjoint.hpp"
#include "rclab/benchmark.hpp"
#include "rclab/chattering.hpp"
#include "rclab/config.hpp"
#include "rclab/control.hpp"
#include "rclab/io.hpp"
#include "rclab/mp_check.hpp"
#include "rclab/simulate.hpp"

namespace rclab {

/// Everything one run produced, with the config echo that reproduces it
/// bit-exactly. Wall-clock timings are kept out of the data exports.
struct RunReport {
    ExperimentConfig config;
    CostEstimate cost;
    std::vector<GapReport> gaps;
    std::optional<io::AdjointComparison> adjoint_errors;
    HamiltonianMinSection hamiltonian_min;
    SingularGlobalSection singular_global;
    SingularIntegralSection singular_integral;
    bool mp_violation = false;
    std::vector<std::pair<std::string, double>> timings;  ///< (stage, seconds)
    std::string failed_stage;  ///< set when a stage aborted the run
};

namespace detail {

inline RelaxedControl control_from_name(const Benchmark& bench, const TimeGrid& grid,
                                        const std::string& name) {
    if (name == "optimal") return bench.optimal_relaxed(grid);
    if (name.rfind("atom:", 0) == 0) {
        const int atom = std::stoi(name.substr(5));
        if (atom < 0 || atom >= bench.spec.atom_count())
            throw InvalidInputError("config: control atom index out of range");
        Vector row = Vector::Zero(bench.spec.atom_count());
        row(atom) = 1.0;
        return RelaxedControl::constant(row, grid);
    }
    throw InvalidInputError("config: unknown control '" + name + "'");
}

inline io::AdjointComparison compare_adjoints(const Benchmark& bench, const TimeGrid& grid,
                                              const TrajectoryEnsemble& traj,
                                              const FirstOrderAdjoint& first,
                                              const SecondOrderAdjoint& second, int basis_degree) {
    io::AdjointComparison cmp;
    cmp.paths = traj.paths;
    cmp.basis_degree = basis_degree;
    double num_p = 0.0, den_p = 0.0, num_P = 0.0, den_P = 0.0, num_k = 0.0, den_k = 0.0;
    for (int p = 0; p < traj.paths; ++p)
        for (int i = 0; i <= grid.steps; ++i) {
            const double t = grid.knot(i);
            const double w = (i < grid.steps) ? grid.step_length(i) : 0.0;
            if (w == 0.0) continue;
            const double p_ref = bench.reference_p(t, traj.state(p, i)(0));
            const double P_ref = bench.reference_P(t);
            const double k_ref = bench.reference_k(t);
            num_p += w * std::pow(first.p(p, i)(0) - p_ref, 2);
            den_p += w * p_ref * p_ref;
            num_P += w * std::pow(first.P(p, i)(0, 0) - P_ref, 2);
            den_P += w * P_ref * P_ref;
            num_k += w * std::pow(second.k(p, i)(0, 0) - k_ref, 2);
            den_k += w * k_ref * k_ref;
        }
    cmp.rel_l2_error_p = den_p > 0.0 ? std::sqrt(num_p / den_p) : std::sqrt(num_p);
    cmp.rel_l2_error_P = den_P > 0.0 ? std::sqrt(num_P / den_P) : std::sqrt(num_P);
    cmp.rel_l2_error_k = den_k > 0.0 ? std::sqrt(num_k / den_k) : std::sqrt(num_k);
    return cmp;
}

/// Deterministic comparison set for the integral singular condition:
/// no action, doubled action, and seeded admissible processes.
inline std::vector<SingularControl> candidate_singulars(const ProblemSpec& spec,
                                                        const TimeGrid& grid,
                                                        const SingularControl& xi,
                                                        std::uint64_t seed, int random_count = 3) {
    std::vector<SingularControl> candidates;
    candidates.push_back(SingularControl::zero(grid, spec.singular_dim));
    SingularControl doubled = xi;
    for (auto& v : doubled.cumulative) v *= 2.0;
    candidates.push_back(doubled);
    RandomStream rs(seed ^ 0xE7A);
    for (int r = 0; r < random_count; ++r) {
        SingularControl eta = SingularControl::zero(grid, spec.singular_dim);
        Vector level = Vector::Zero(spec.singular_dim);
        for (int i = 1; i <= grid.steps; ++i) {
            for (int c = 0; c < spec.singular_dim; ++c)
                if (rs.uniform() < 3.0 / grid.steps) level(c) += std::abs(rs.normal());
            eta.cumulative[static_cast<std::size_t>(i)] = level;
        }
        candidates.push_back(eta);
    }
    return candidates;
}

}  // namespace detail

/// Orchestrate one full run: simulate the configured control, measure the
/// chattering gaps, solve both adjoints (comparing against closed forms when
/// the benchmark has them), run the optimality checks, and write every
/// export under the config's output directory. Deterministic for a fixed
/// config, independent of the worker count. Partial results are flushed as
/// each stage completes, so an aborting stage leaves the earlier files.
inline RunReport run_experiment(const ExperimentConfig& cfg, int workers = 0) {
    cfg.validate();
    RunReport report;
    report.config = cfg;
    const std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);
    io::write_file(out / "config.echo.txt", serialize_config(cfg));

    const Benchmark bench = make_benchmark(cfg.benchmark);
    const ProblemSpec& spec = bench.spec;
    const TimeGrid grid(cfg.steps, spec.horizon);
    const RelaxedControl mu = detail::control_from_name(bench, grid, cfg.control);
    const SingularControl xi = bench.optimal_singular(grid);
    const RegressionBasis basis{cfg.basis_degree, cfg.ridge};

    using Clock = std::chrono::steady_clock;
    auto timed = [&](const char* stage, auto&& fn) {
        const auto start = Clock::now();
        fn();
        report.timings.emplace_back(
            stage, std::chrono::duration<double>(Clock::now() - start).count());
    };

    TrajectoryEnsemble traj;
    NoiseEnsemble noise;
    FirstOrderAdjoint first;
    SecondOrderAdjoint second;
    try {
        report.failed_stage = "simulate";
        timed("simulate", [&] {
            noise = NoiseEnsemble::generate(cfg.seed, cfg.paths, grid.steps, spec.noise_dim,
                                            grid.dt(), 1, workers);
            traj = simulate_relaxed(spec, grid, mu, xi, noise, workers);
            report.cost = cost(spec, grid, traj, mu, xi, workers);
            io::write_file(out / "trajectories.csv", io::trajectories_csv(grid, traj));
            io::write_file(out / "cost.json", io::cost_json(report.cost).dump(2) + "\n");
        });

        report.failed_stage = "chattering";
        timed("chattering", [&] {
            report.gaps = stability_report(spec, grid, mu, xi, cfg.chattering_orders, cfg.paths,
                                           cfg.seed, workers);
            io::write_file(out / "gaps.csv", io::gap_reports_csv(report.gaps));
        });

        report.failed_stage = "adjoint";
        timed("adjoint", [&] {
            first = solve_first_order(spec, grid, traj, mu, noise, basis, workers);
            second = solve_second_order(spec, grid, traj, mu, noise, basis, first, workers);
            io::write_file(out / "adjoint.csv", io::adjoint_csv(grid, first));
            if (bench.reference_p && bench.reference_P && bench.reference_k &&
                spec.state_dim == 1) {
                report.adjoint_errors =
                    detail::compare_adjoints(bench, grid, traj, first, second, cfg.basis_degree);
                io::write_file(out / "adjoint_compare.json",
                               io::adjoint_comparison_json(*report.adjoint_errors).dump(2) + "\n");
            }
        });

        report.failed_stage = "check-mp";
        timed("check-mp", [&] {
            report.hamiltonian_min = check_hamiltonian_min(spec, grid, traj, mu, first, second,
                                                           cfg.tolerance, 100, cfg.seed);
            report.singular_global = check_singular_global(spec, grid, first, xi, cfg.tolerance);
            report.singular_integral = check_singular_integral(
                spec, grid, first, xi, detail::candidate_singulars(spec, grid, xi, cfg.seed),
                cfg.tolerance);
            report.mp_violation = !report.hamiltonian_min.passed ||
                                  !report.singular_global.nonnegativity_passed ||
                                  !report.singular_global.complementarity_passed ||
                                  !report.singular_integral.passed;
            io::write_file(out / "mp_report.json",
                           io::mp_report_json(report.hamiltonian_min, report.singular_global,
                                              report.singular_integral, cfg.constant_c,
                                              cfg.tolerance, cfg.seed)
                                   .dump(2) +
                               "\n");
            io::write_file(out / "mp_knots.csv",
                           io::mp_knots_csv(grid, report.hamiltonian_min, report.singular_global));
        });
        report.failed_stage.clear();
    } catch (...) {
        // Flush timings for the stages that did complete, then propagate with
        // the failing stage recorded in the report the caller already holds.
        Json timings = Json::array();
        for (const auto& [stage, seconds] : report.timings)
            timings.push_back(Json{{"stage", stage}, {"seconds", seconds}});
        io::write_file(out / "timings.json", timings.dump(2) + "\n");
        throw;
    }

    Json timings = Json::array();
    for (const auto& [stage, seconds] : report.timings)
        timings.push_back(Json{{"stage", stage}, {"seconds", seconds}});
    io::write_file(out / "timings.json", timings.dump(2) + "\n");
    return report;
}

}  // namespace rclab
