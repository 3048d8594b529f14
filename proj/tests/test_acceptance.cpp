// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line with its headline numbers.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rclab/rclab.hpp"

using namespace rclab;

namespace {

void report(int criterion, const std::string& what, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << "criterion " << criterion << ": " << what << " ("
              << detail << ")" << std::endl;
}

Vector scalar(double v) {
    Vector x(1);
    x(0) = v;
    return x;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("criterion 1: double-well chattering bounds") {
    const Benchmark bench = benchmark_example1();
    bool ok = true;
    std::ostringstream detail;
    for (int n : {10, 100}) {
        TimeGrid base(1, 1.0);
        const auto elem = chatter(bench.optimal_relaxed(base), n, base);
        const auto noise = NoiseEnsemble::generate(1, 1, elem.fine_grid.steps, 1, elem.fine_grid.dt());
        const auto xi = SingularControl::zero(elem.fine_grid, 1);
        const auto traj = simulate_strict(bench.spec, elem.fine_grid, elem.control, xi, noise);
        double sup = 0.0;
        for (int i = 0; i <= elem.fine_grid.steps; ++i)
            sup = std::max(sup, std::abs(traj.state(0, i)(0)));
        const double J = cost(bench.spec, elem.fine_grid, traj, elem.control, xi).mean;
        const double sup_bound = 1.0 / n;
        const double cost_bound = 1.0 / (static_cast<double>(n) * n);
        ok = ok && sup <= sup_bound + 1e-12 && J <= cost_bound + 1e-12;
        detail << "n=" << n << " sup=" << sup << "<=" << sup_bound << " J=" << J
               << "<=" << cost_bound << "  ";
    }
    report(1, "chattering trajectory and cost bounds", ok, detail.str());
    REQUIRE(ok);
}

TEST_CASE("criterion 2: Dirac embedding equivalence across benchmarks") {
    double worst = 0.0;
    for (const std::string& id : benchmark_ids()) {
        const Benchmark bench = make_benchmark(id);
        TimeGrid grid(25, bench.spec.horizon);
        const auto xi = bench.optimal_singular(grid);
        const auto noise =
            NoiseEnsemble::generate(1001, 4, grid.steps, bench.spec.noise_dim, grid.dt());
        RandomStream rs(2002);
        for (int trial = 0; trial < 100; ++trial) {
            StrictControl v;
            for (int i = 0; i < grid.steps; ++i)
                v.table.push_back(rs.uniform_int(bench.spec.atom_count()));
            const auto strict = simulate_strict(bench.spec, grid, v, xi, noise);
            const auto relaxed = simulate_relaxed(
                bench.spec, grid, dirac_embed(v, bench.spec.atom_count()), xi, noise);
            for (int p = 0; p < strict.paths; ++p)
                for (int i = 0; i <= grid.steps; ++i)
                    worst = std::max(
                        worst, (strict.state(p, i) - relaxed.state(p, i)).cwiseAbs().maxCoeff());
        }
    }
    const bool ok = worst <= 1e-12;
    report(2, "coupled strict vs embedded-relaxed trajectories", ok,
           "worst entrywise gap " + std::to_string(worst));
    REQUIRE(ok);
}

TEST_CASE("criterion 3: chattering stability gap falls by at least a factor two") {
    const Benchmark bench = benchmark_example2(Example2Variant::FullStochastic);
    TimeGrid grid(50, 1.0);
    const auto mu = bench.optimal_relaxed(grid);
    const auto xi = bench.optimal_singular(grid);
    const auto reports = stability_report(bench.spec, grid, mu, xi, {4, 64}, 10000, 42);
    REQUIRE(reports.size() == 2);
    const GapReport& coarse = reports[0];
    const GapReport& fine = reports[1];
    const bool ok = fine.trajectory + 2.0 * fine.trajectory_stderr <=
                    0.5 * (coarse.trajectory - 2.0 * coarse.trajectory_stderr);
    std::ostringstream detail;
    detail << "E[sup|x^n - x^mu|^2]: n=4 " << coarse.trajectory << " (se "
           << coarse.trajectory_stderr << "), n=64 " << fine.trajectory << " (se "
           << fine.trajectory_stderr << ")";
    report(3, "trajectory gap factor-2 decay from order 4 to 64", ok, detail.str());
    REQUIRE(ok);
}

TEST_CASE("criterion 4: regression adjoints match the closed-form solution") {
    const Benchmark bench = benchmark_example2(Example2Variant::FullStochastic);
    const int paths = 10000;
    TimeGrid grid(50, 1.0);
    const auto mu = bench.optimal_relaxed(grid);
    const auto xi = bench.optimal_singular(grid);
    const auto noise = NoiseEnsemble::generate(42, paths, grid.steps, 1, grid.dt());
    const auto traj = simulate_relaxed(bench.spec, grid, mu, xi, noise);
    const RegressionBasis basis{2, 1e-8};
    const auto first = solve_first_order(bench.spec, grid, traj, mu, noise, basis);
    const auto second = solve_second_order(bench.spec, grid, traj, mu, noise, basis, first);
    double np = 0, dp = 0, nP = 0, dP = 0, nk = 0, dk = 0;
    for (int p = 0; p < paths; ++p)
        for (int i = 0; i < grid.steps; ++i) {
            const double t = grid.knot(i);
            const double w = grid.step_length(i);
            const double p_ref = 2.0 * (1.0 - t) * traj.state(p, i)(0);
            const double P_ref = 2.0 * (1.0 - t);
            np += w * std::pow(first.p(p, i)(0) - p_ref, 2);
            dp += w * p_ref * p_ref;
            nP += w * std::pow(first.P(p, i)(0, 0) - P_ref, 2);
            dP += w * P_ref * P_ref;
            nk += w * std::pow(second.k(p, i)(0, 0) - P_ref, 2);
            dk += w * P_ref * P_ref;
        }
    const double rel_p = std::sqrt(np / dp);
    const double rel_P = std::sqrt(nP / dP);
    const double rel_k = std::sqrt(nk / dk);
    const bool ok = rel_p <= 0.05 && rel_P <= 0.05 && rel_k <= 0.05;
    std::ostringstream detail;
    detail << "rel L2 errors: p " << rel_p << ", P " << rel_P << ", k " << rel_k << " (gate 0.05)";
    report(4, "first- and second-order adjoint oracle", ok, detail.str());
    REQUIRE(ok);
}

TEST_CASE("criterion 5: relaxed Hamiltonian minimization at optima and under corruption") {
    bool ok = true;
    std::ostringstream detail;
    auto run = [&](const Benchmark& bench, const RelaxedControl& mu, const TimeGrid& grid) {
        const auto noise = NoiseEnsemble::generate(7, 4, grid.steps, 1, grid.dt());
        const auto xi = bench.optimal_singular(grid);
        const auto traj = simulate_relaxed(bench.spec, grid, mu, xi, noise);
        const RegressionBasis basis;
        const auto first = solve_first_order(bench.spec, grid, traj, mu, noise, basis);
        const auto second = solve_second_order(bench.spec, grid, traj, mu, noise, basis, first);
        return check_hamiltonian_min(bench.spec, grid, traj, mu, first, second, 1e-6);
    };

    TimeGrid grid(50, 1.0);
    const Benchmark ex1 = benchmark_example1();
    const auto sec1 = run(ex1, ex1.optimal_relaxed(grid), grid);
    double worst_at_opt = sec1.worst_violation;
    ok = ok && sec1.worst_violation <= 1e-6;

    const Benchmark ex2 = benchmark_example2(Example2Variant::DeterministicMean);
    const auto sec2 = run(ex2, ex2.optimal_relaxed(grid), grid);
    worst_at_opt = std::max(worst_at_opt, sec2.worst_violation);
    ok = ok && sec2.worst_violation <= 1e-6;

    Vector dirac0 = Vector::Zero(3);
    dirac0(1) = 1.0;
    const auto sec3 = run(ex2, RelaxedControl::constant(dirac0, grid), grid);
    double min_knot_violation = std::numeric_limits<double>::infinity();
    for (double v : sec3.per_knot_worst) min_knot_violation = std::min(min_knot_violation, v);
    ok = ok && min_knot_violation >= 0.5;

    detail << "worst violation at optima " << worst_at_opt << " (gate 1e-6); corrupted control "
           << "violation at every knot >= " << min_knot_violation << " (gate 0.5)";
    report(5, "Hamiltonian minimum condition", ok, detail.str());
    REQUIRE(ok);
}

TEST_CASE("criterion 6: singular optimality conditions and the overshoot flag") {
    const Benchmark bench = benchmark_singular();
    TimeGrid grid(50, 1.0);
    const auto mu = bench.optimal_relaxed(grid);
    const auto xi = bench.optimal_singular(grid);
    const auto noise = NoiseEnsemble::generate(17, 4, grid.steps, 1, grid.dt());
    const auto traj = simulate_relaxed(bench.spec, grid, mu, xi, noise);
    const auto first = solve_first_order(bench.spec, grid, traj, mu, noise, RegressionBasis{});
    const auto global = check_singular_global(bench.spec, grid, first, xi, 1e-9);

    const SingularControl overshoot = SingularControl::single_jump(grid, scalar(2.0), 0);
    const auto traj_over = simulate_relaxed(bench.spec, grid, mu, overshoot, noise);
    const auto first_over =
        solve_first_order(bench.spec, grid, traj_over, mu, noise, RegressionBasis{});
    const auto integral = check_singular_integral(bench.spec, grid, first_over, overshoot,
                                                  {SingularControl::zero(grid, 1)}, 1e-9);
    const double flagged = integral.candidates[0].integral;

    const bool ok = global.min_slack >= -1e-9 && global.complementary_mass <= 1e-9 &&
                    flagged <= -5.0 && std::abs(flagged + 6.0) <= 1.0;
    std::ostringstream detail;
    detail << "min slack " << global.min_slack << ", complementary mass "
           << global.complementary_mass << ", overshoot integral " << flagged << " (hand value -6)";
    report(6, "singular nonnegativity, complementarity, overshoot detection", ok, detail.str());
    REQUIRE(ok);
}

TEST_CASE("criterion 7: near-optimality inequality sweep on the double-well") {
    const Benchmark bench = benchmark_example1();
    TimeGrid grid(50, 1.0);
    const int order = 10;
    const auto elem = chatter(bench.optimal_relaxed(grid), order, grid);
    const auto xi = SingularControl::zero(elem.fine_grid, 1);
    const double eps_n = 1.0 / (static_cast<double>(order) * order);  // T^3 / n^2
    const auto sweep = check_near_optimality(bench.spec, elem.fine_grid, elem.control, xi, eps_n,
                                             200, 1.0, 0.0, 1, 4242);
    const bool ok = sweep.passed && sweep.worst_slack >= 0.0;
    std::ostringstream detail;
    detail << "200 perturbations, worst slack " << sweep.worst_slack << ", violations "
           << sweep.violations;
    report(7, "spike and convex perturbation inequalities", ok, detail.str());
    REQUIRE(ok);
}

TEST_CASE("criterion 8: property suites") {
    bool ok = true;
    std::ostringstream detail;

    // Affinity of relaxed coefficients and of the generalized Hamiltonian.
    {
        const ProblemSpec spec = benchmark_example2(Example2Variant::FullStochastic).spec;
        RandomStream rs(88);
        double worst = 0.0;
        Vector mu(3);
        for (int j = 0; j < 3; ++j) mu(j) = -std::log(rs.uniform());
        mu /= mu.sum();
        for (int trial = 0; trial < 300; ++trial) {
            Vector q1(3), q2(3);
            for (int j = 0; j < 3; ++j) q1(j) = -std::log(rs.uniform());
            for (int j = 0; j < 3; ++j) q2(j) = -std::log(rs.uniform());
            q1 /= q1.sum();
            q2 /= q2.sum();
            const double alpha = rs.uniform();
            const Vector mix = alpha * q1 + (1.0 - alpha) * q2;
            const double t = rs.uniform();
            const Vector x = scalar(rs.normal());
            const Vector p = scalar(rs.normal());
            const Matrix P = scalar(rs.normal());
            const Matrix k = scalar(rs.normal());
            worst = std::max(worst,
                             std::abs(relaxed_running_cost(spec, t, x, mix) -
                                      alpha * relaxed_running_cost(spec, t, x, q1) -
                                      (1.0 - alpha) * relaxed_running_cost(spec, t, x, q2)));
            worst = std::max(
                worst, std::abs(generalized_hamiltonian(spec, t, x, mix, p, P, k, mu) -
                                alpha * generalized_hamiltonian(spec, t, x, q1, p, P, k, mu) -
                                (1.0 - alpha) * generalized_hamiltonian(spec, t, x, q2, p, P, k, mu)));
        }
        ok = ok && worst <= 1e-12;
        detail << "affinity worst " << worst;
    }

    // Atom minimum equals the minimum over random simplex points.
    {
        const ProblemSpec spec = benchmark_example2(Example2Variant::FullStochastic).spec;
        RandomStream rs(89);
        double worst = 0.0;
        Vector mu(3);
        mu << 0.5, 0.0, 0.5;
        for (int trial = 0; trial < 50; ++trial) {
            const double t = rs.uniform();
            const Vector x = scalar(rs.normal());
            const Vector p = scalar(rs.normal());
            const Matrix P = scalar(rs.normal());
            const Matrix k = scalar(rs.normal());
            double atom_min = std::numeric_limits<double>::infinity();
            for (int j = 0; j < 3; ++j) {
                Vector row = Vector::Zero(3);
                row(j) = 1.0;
                atom_min =
                    std::min(atom_min, generalized_hamiltonian(spec, t, x, row, p, P, k, mu));
            }
            for (int s = 0; s < 100; ++s) {
                Vector q(3);
                for (int j = 0; j < 3; ++j) q(j) = -std::log(rs.uniform());
                q /= q.sum();
                worst = std::max(
                    worst, atom_min - generalized_hamiltonian(spec, t, x, q, p, P, k, mu));
            }
        }
        ok = ok && worst <= 1e-12;
        detail << "; atom-min slack " << worst;
    }

    // Pseudometric axioms on 1000 random triples.
    {
        TimeGrid grid(12, 1.0);
        RandomStream rs(90);
        bool metrics_ok = true;
        for (int trial = 0; trial < 1000; ++trial) {
            StrictControl a, b, c;
            for (int i = 0; i < grid.steps; ++i) {
                a.table.push_back(rs.uniform_int(3));
                b.table.push_back(rs.uniform_int(3));
                c.table.push_back(rs.uniform_int(3));
            }
            metrics_ok = metrics_ok && ekeland_d1(a, b, grid) == ekeland_d1(b, a, grid) &&
                         ekeland_d1(a, b, grid) <=
                             ekeland_d1(a, c, grid) + ekeland_d1(c, b, grid) + 1e-12;
            SingularControl ea = SingularControl::zero(grid, 1);
            SingularControl eb = SingularControl::zero(grid, 1);
            SingularControl ec = SingularControl::zero(grid, 1);
            double la = 0, lb = 0, lc = 0;
            for (int i = 1; i <= grid.steps; ++i) {
                la += rs.uniform() < 0.3 ? std::abs(rs.normal()) : 0.0;
                lb += rs.uniform() < 0.3 ? std::abs(rs.normal()) : 0.0;
                lc += rs.uniform() < 0.3 ? std::abs(rs.normal()) : 0.0;
                ea.cumulative[static_cast<std::size_t>(i)] = scalar(la);
                eb.cumulative[static_cast<std::size_t>(i)] = scalar(lb);
                ec.cumulative[static_cast<std::size_t>(i)] = scalar(lc);
            }
            metrics_ok = metrics_ok && ekeland_d2(ea, eb, grid) == ekeland_d2(eb, ea, grid) &&
                         ekeland_d2(ea, eb, grid) <=
                             ekeland_d2(ea, ec, grid) + ekeland_d2(ec, eb, grid) + 1e-12;
        }
        ok = ok && metrics_ok;
        detail << "; pseudometrics " << (metrics_ok ? "ok" : "violated");
    }

    // Exact terminal conditions and the gradient cross-check.
    {
        const Benchmark bench = benchmark_example2(Example2Variant::FullStochastic);
        TimeGrid grid(10, 1.0);
        const auto mu = bench.optimal_relaxed(grid);
        const auto noise = NoiseEnsemble::generate(91, 300, grid.steps, 1, grid.dt());
        const auto traj =
            simulate_relaxed(bench.spec, grid, mu, bench.optimal_singular(grid), noise);
        const auto first = solve_first_order(bench.spec, grid, traj, mu, noise, RegressionBasis{});
        const auto second =
            solve_second_order(bench.spec, grid, traj, mu, noise, RegressionBasis{}, first);
        bool terminal_ok = true;
        for (int p = 0; p < traj.paths; ++p) {
            terminal_ok = terminal_ok &&
                          first.p(p, grid.steps)(0) ==
                              bench.spec.terminal_gradient(traj.state(p, grid.steps))(0) &&
                          second.k(p, grid.steps)(0, 0) ==
                              bench.spec.terminal_hessian(traj.state(p, grid.steps))(0, 0);
        }
        const double fd = hx_finite_difference_check(bench.spec);
        ok = ok && terminal_ok && fd <= 1e-6;
        detail << "; terminal " << (terminal_ok ? "exact" : "broken") << "; Hx fd check " << fd;
    }

    report(8, "affinity, atom-min, pseudometrics, terminal, gradient checks", ok, detail.str());
    REQUIRE(ok);
}

TEST_CASE("criterion 9: byte-identical reruns independent of the worker count") {
    const auto root = std::filesystem::temp_directory_path() / "rclab_acceptance_determinism";
    std::filesystem::remove_all(root);
    ExperimentConfig cfg;
    cfg.benchmark = "example2-full";
    cfg.seed = 2025;
    cfg.paths = 300;
    cfg.steps = 15;
    cfg.chattering_orders = {2, 8};
    cfg.out_dir = (root / "a").string();
    run_experiment(cfg, 1);
    cfg.out_dir = (root / "b").string();
    run_experiment(cfg, 4);
    cfg.out_dir = (root / "c").string();
    run_experiment(cfg, 3);

    bool ok = true;
    for (const std::string& name :
         {"trajectories.csv", "cost.json", "gaps.csv", "adjoint.csv", "adjoint_compare.json",
          "mp_report.json", "mp_knots.csv"}) {
        const std::string a = slurp(root / "a" / name);
        ok = ok && a == slurp(root / "b" / name) && a == slurp(root / "c" / name);
    }
    report(9, "experiment reruns are byte-identical across worker counts", ok,
           "compared 7 export files across 3 runs");
    REQUIRE(ok);
    std::filesystem::remove_all(root);
}
