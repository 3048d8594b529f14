#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rclab/benchmark.hpp"
#include "rclab/config.hpp"
#include "rclab/experiment.hpp"

using namespace rclab;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("all built-in benchmarks validate cleanly") {
    for (const std::string& id : benchmark_ids()) {
        const Benchmark bench = make_benchmark(id);
        CAPTURE(id);
        CHECK(validate_spec(bench.spec).empty());
    }
    CHECK_THROWS_AS(make_benchmark("nope"), InvalidInputError);
}

TEST_CASE("double-well reference values") {
    const Benchmark bench = benchmark_example1();
    TimeGrid grid(100, 1.0);
    const auto mu = bench.optimal_relaxed(grid);
    const auto xi = bench.optimal_singular(grid);
    const auto noise = NoiseEnsemble::generate(1, 1, grid.steps, 1, grid.dt());

    const auto at_mu = simulate_relaxed(bench.spec, grid, mu, xi, noise);
    CHECK(cost(bench.spec, grid, at_mu, mu, xi).mean == bench.optimal_cost);

    // Constant +1 control: left Riemann sum of t^2, within one step of 1/3.
    const StrictControl plus = StrictControl::constant(2, grid);
    const auto at_plus = simulate_strict(bench.spec, grid, plus, xi, noise);
    CHECK(cost(bench.spec, grid, at_plus, plus, xi).mean ==
          Catch::Approx(1.0 / 3.0).margin(grid.dt()));

    // Alternating control of order n: cost in (0, T^3/n^2].
    const int n = 10;
    TimeGrid fine(n, 1.0);
    const StrictControl alt = alternating_extremes(fine, 0, 2);
    const auto noise_fine = NoiseEnsemble::generate(1, 1, fine.steps, 1, fine.dt());
    const auto at_alt =
        simulate_strict(bench.spec, fine, alt, SingularControl::zero(fine, 1), noise_fine);
    const double J = cost(bench.spec, fine, at_alt, alt, SingularControl::zero(fine, 1)).mean;
    CHECK(J > 0.0);
    CHECK(J <= 1.0 / (n * n) + 1e-12);
}

TEST_CASE("action-penalty reference values") {
    const Benchmark mean = benchmark_example2(Example2Variant::DeterministicMean);
    TimeGrid grid(50, 1.0);
    const auto mu = mean.optimal_relaxed(grid);
    const auto xi = mean.optimal_singular(grid);
    const auto noise = NoiseEnsemble::generate(2, 2, grid.steps, 1, grid.dt());
    const auto at_mu = simulate_relaxed(mean.spec, grid, mu, xi, noise);
    CHECK(cost(mean.spec, grid, at_mu, mu, xi).mean == 0.0);

    // Dirac at the middle atom: the penalty is 1 along the frozen path.
    Vector dirac0 = Vector::Zero(3);
    dirac0(1) = 1.0;
    const auto q0 = RelaxedControl::constant(dirac0, grid);
    const auto at_q0 = simulate_relaxed(mean.spec, grid, q0, xi, noise);
    CHECK(cost(mean.spec, grid, at_q0, q0, xi).mean == Catch::Approx(1.0).margin(1e-12));

    const Benchmark full = benchmark_example2(Example2Variant::FullStochastic);
    const int paths = 10000;
    const auto big_noise = NoiseEnsemble::generate(42, paths, grid.steps, 1, grid.dt());
    const auto mu_full = full.optimal_relaxed(grid);
    const auto at_full = simulate_relaxed(full.spec, grid, mu_full, xi, big_noise);
    const CostEstimate est = cost(full.spec, grid, at_full, mu_full, xi);
    // Discrete expectation: sum over knots of t_i dt = (T^2/2)(1 - 1/N).
    const double discrete_ref = 0.5 * (1.0 - 1.0 / grid.steps);
    CHECK(std::abs(est.mean - discrete_ref) <= 3.0 * est.stderr_);
    CHECK(std::abs(est.mean - full.optimal_cost) <= 3.0 * est.stderr_ + 0.5 * grid.dt());
}

TEST_CASE("singular benchmark reference values and conditions") {
    const Benchmark bench = benchmark_singular();
    TimeGrid grid(40, 1.0);
    const auto mu = bench.optimal_relaxed(grid);
    const auto xi = bench.optimal_singular(grid);
    const auto noise = NoiseEnsemble::generate(3, 2, grid.steps, 1, grid.dt());
    const auto at_xi = simulate_relaxed(bench.spec, grid, mu, xi, noise);
    CHECK(cost(bench.spec, grid, at_xi, mu, xi).mean == 0.75);

    const auto zero = SingularControl::zero(grid, 1);
    const auto at_zero = simulate_relaxed(bench.spec, grid, mu, zero, noise);
    CHECK(cost(bench.spec, grid, at_zero, mu, zero).mean == 1.0);

    const auto first = solve_first_order(bench.spec, grid, at_xi, mu, noise, RegressionBasis{});
    const auto global = check_singular_global(bench.spec, grid, first, xi, 1e-9);
    CHECK(global.nonnegativity_passed);
    CHECK(global.complementarity_passed);
    CHECK(std::abs(global.min_slack) <= 1e-12);
}

TEST_CASE("config round trip: parse, serialize, reparse") {
    const std::string text =
        "# comment\n"
        "[experiment]\n"
        "benchmark = example1\n"
        "seed = 99\n"
        "paths = 128  # inline comment\n"
        "steps = 25\n"
        "\n[chattering]\n"
        "orders = 2 8\n"
        "[checker]\n"
        "tolerance = 1e-7\n";
    const ExperimentConfig cfg = parse_config(text);
    CHECK(cfg.benchmark == "example1");
    CHECK(cfg.seed == 99);
    CHECK(cfg.paths == 128);
    CHECK(cfg.steps == 25);
    CHECK(cfg.chattering_orders == std::vector<int>{2, 8});
    CHECK(cfg.tolerance == 1e-7);
    const std::string echo = serialize_config(cfg);
    CHECK(serialize_config(parse_config(echo)) == echo);
}

TEST_CASE("config requires a seed and rejects unknown keys") {
    CHECK_THROWS_AS(parse_config("[experiment]\nbenchmark = example1\n"), InvalidInputError);
    CHECK_THROWS_AS(parse_config("[experiment]\nbenchmark = example1\nseed = 1\nwat = 2\n"),
                    InvalidInputError);
}

TEST_CASE("run_experiment writes the full export set and reruns byte-identically") {
    const auto root = std::filesystem::temp_directory_path() / "rclab_test_runs";
    std::filesystem::remove_all(root);
    ExperimentConfig cfg;
    cfg.benchmark = "example2-full";
    cfg.seed = 21;
    cfg.paths = 200;
    cfg.steps = 12;
    cfg.chattering_orders = {2, 4};
    cfg.out_dir = (root / "a").string();
    const RunReport report_a = run_experiment(cfg, 1);
    CHECK_FALSE(report_a.mp_violation);
    REQUIRE(report_a.adjoint_errors.has_value());

    cfg.out_dir = (root / "b").string();
    const RunReport report_b = run_experiment(cfg, 4);

    const std::vector<std::string> files = {"trajectories.csv", "cost.json",     "gaps.csv",
                                            "adjoint.csv",      "mp_report.json", "mp_knots.csv",
                                            "adjoint_compare.json"};
    for (const auto& name : files) {
        CAPTURE(name);
        CHECK(slurp(root / "a" / name) == slurp(root / "b" / name));
    }
    // The echo differs only in the out directory line.
    const std::string echo_a = slurp(root / "a" / "config.echo.txt");
    CHECK(parse_config(echo_a).seed == cfg.seed);

    // Re-running the parsed echo reproduces the data bytes.
    ExperimentConfig cfg_c = parse_config(echo_a);
    cfg_c.out_dir = (root / "c").string();
    run_experiment(cfg_c, 2);
    for (const auto& name : files) {
        CAPTURE(name);
        CHECK(slurp(root / "a" / name) == slurp(root / "c" / name));
    }
    std::filesystem::remove_all(root);
}

TEST_CASE("run_experiment flags the corrupted control through the checker") {
    const auto root = std::filesystem::temp_directory_path() / "rclab_test_violation";
    std::filesystem::remove_all(root);
    ExperimentConfig cfg;
    cfg.benchmark = "example2-mean";
    cfg.seed = 5;
    cfg.paths = 8;
    cfg.steps = 10;
    cfg.control = "atom:1";
    cfg.chattering_orders = {2};
    cfg.out_dir = (root / "run").string();
    const RunReport report = run_experiment(cfg, 1);
    CHECK(report.mp_violation);
    CHECK(report.hamiltonian_min.worst_violation >= 0.5);
    std::filesystem::remove_all(root);
}

TEST_CASE("experiment flushes partial results when a stage aborts") {
    const auto root = std::filesystem::temp_directory_path() / "rclab_test_abort";
    std::filesystem::remove_all(root);
    ExperimentConfig cfg;
    cfg.benchmark = "example2-full";
    cfg.seed = 11;
    cfg.paths = 30;  // 3 < paths/10 fails for the degree-3 basis below
    cfg.steps = 8;
    cfg.chattering_orders = {2};
    cfg.basis_degree = 3;
    cfg.paths = 30;
    cfg.out_dir = (root / "run").string();
    CHECK_THROWS_AS(run_experiment(cfg, 1), InvalidInputError);
    CHECK(std::filesystem::exists(root / "run" / "cost.json"));
    CHECK(std::filesystem::exists(root / "run" / "gaps.csv"));
    CHECK(std::filesystem::exists(root / "run" / "timings.json"));
    CHECK_FALSE(std::filesystem::exists(root / "run" / "adjoint.csv"));
    std::filesystem::remove_all(root);
}
