// Command-line front end: one subcommand per pipeline stage plus `bench`
// for the full run. Exit codes: 0 all checks passed, 2 an optimality
// condition was violated, 1 execution error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rclab/rclab.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw rclab::Error("cannot read config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CliOptions {
    std::string config_path;
    std::string benchmark;
    std::string control;
    std::string out_dir;
    std::int64_t seed = -1;
    int paths = 0;
    int steps = 0;
    int workers = 0;
};

rclab::ExperimentConfig resolve_config(const CliOptions& opt) {
    rclab::ExperimentConfig cfg;
    bool have_seed = false;
    if (!opt.config_path.empty()) {
        cfg = rclab::parse_config(read_file(opt.config_path));
        have_seed = true;
    }
    if (!opt.benchmark.empty()) cfg.benchmark = opt.benchmark;
    if (!opt.control.empty()) cfg.control = opt.control;
    if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
    if (opt.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(opt.seed);
        have_seed = true;
    }
    if (opt.paths > 0) cfg.paths = opt.paths;
    if (opt.steps > 0) cfg.steps = opt.steps;
    if (!have_seed) throw rclab::InvalidInputError("a seed is required (config file or --seed)");
    cfg.validate();
    return cfg;
}

void add_common_options(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "configuration file");
    cmd->add_option("--benchmark", opt.benchmark, "benchmark id (overrides config)");
    cmd->add_option("--control", opt.control, "candidate control: optimal or atom:<j>");
    cmd->add_option("--seed,-s", opt.seed, "RNG seed (overrides config)");
    cmd->add_option("--paths,-p", opt.paths, "Monte Carlo path count");
    cmd->add_option("--steps,-n", opt.steps, "time grid steps");
    cmd->add_option("--out,-o", opt.out_dir, "output directory");
    cmd->add_option("--workers,-w", opt.workers, "worker threads (0 = hardware)");
}

int finish(const rclab::RunReport& report) {
    if (report.mp_violation) {
        std::cout << "optimality violation detected (see mp_report.json)\n";
        return 2;
    }
    std::cout << "all checks passed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rclab - relaxed and singular stochastic control laboratory"};
    app.require_subcommand(1);

    CliOptions opt;
    auto* simulate = app.add_subcommand("simulate", "simulate the configured control and export cost");
    auto* chatter = app.add_subcommand("chatter", "chattering stability report");
    auto* adjoint = app.add_subcommand("adjoint", "solve the adjoint equations and export them");
    auto* check = app.add_subcommand("check-mp", "run the optimality condition checks");
    auto* bench = app.add_subcommand("bench", "full pipeline for one benchmark");
    std::string bench_id;
    bench->add_option("id", bench_id, "benchmark id")->required();
    for (CLI::App* cmd : {simulate, chatter, adjoint, check, bench}) add_common_options(cmd, opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (bench->parsed()) opt.benchmark = bench_id;
        rclab::ExperimentConfig cfg = resolve_config(opt);

        // Single-stage subcommands reuse the orchestrator with the later
        // stages trimmed: they run what they need and ignore the rest.
        if (simulate->parsed()) {
            cfg.chattering_orders.clear();
            const rclab::Benchmark b = rclab::make_benchmark(cfg.benchmark);
            const rclab::TimeGrid grid(cfg.steps, b.spec.horizon);
            const auto mu = rclab::detail::control_from_name(b, grid, cfg.control);
            const auto xi = b.optimal_singular(grid);
            const auto noise = rclab::NoiseEnsemble::generate(
                cfg.seed, cfg.paths, grid.steps, b.spec.noise_dim, grid.dt(), 1, opt.workers);
            const auto traj = rclab::simulate_relaxed(b.spec, grid, mu, xi, noise, opt.workers);
            const auto est = rclab::cost(b.spec, grid, traj, mu, xi, opt.workers);
            std::filesystem::path out(cfg.out_dir);
            rclab::io::write_file(out / "config.echo.txt", rclab::serialize_config(cfg));
            rclab::io::write_file(out / "trajectories.csv", rclab::io::trajectories_csv(grid, traj));
            rclab::io::write_file(out / "cost.json", rclab::io::cost_json(est).dump(2) + "\n");
            std::cout << "cost mean " << est.mean << " stderr " << est.stderr_ << "\n";
            return 0;
        }
        if (chatter->parsed()) {
            const rclab::Benchmark b = rclab::make_benchmark(cfg.benchmark);
            const rclab::TimeGrid grid(cfg.steps, b.spec.horizon);
            const auto mu = rclab::detail::control_from_name(b, grid, cfg.control);
            const auto xi = b.optimal_singular(grid);
            const auto gaps = rclab::stability_report(b.spec, grid, mu, xi, cfg.chattering_orders,
                                                      cfg.paths, cfg.seed, opt.workers);
            std::filesystem::path out(cfg.out_dir);
            rclab::io::write_file(out / "config.echo.txt", rclab::serialize_config(cfg));
            rclab::io::write_file(out / "gaps.csv", rclab::io::gap_reports_csv(gaps));
            for (const auto& g : gaps)
                std::cout << "order " << g.order << ": traj gap " << g.trajectory << ", cost gap "
                          << g.cost << "\n";
            return 0;
        }

        // adjoint, check-mp and bench share the full orchestration; adjoint
        // and check-mp just run it with the chattering stage reduced.
        if (adjoint->parsed() || check->parsed()) cfg.chattering_orders = {1};
        const rclab::RunReport report = rclab::run_experiment(cfg, opt.workers);
        if (adjoint->parsed()) {
            if (report.adjoint_errors)
                std::cout << "adjoint rel L2 errors: p " << report.adjoint_errors->rel_l2_error_p
                          << ", P " << report.adjoint_errors->rel_l2_error_P << ", k "
                          << report.adjoint_errors->rel_l2_error_k << "\n";
            else
                std::cout << "adjoint solved (no analytic reference for this benchmark)\n";
            return 0;
        }
        return finish(report);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
