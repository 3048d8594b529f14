#include <catch2/catch_amalgamated.hpp>

#include "rclab/benchmark.hpp"
#include "rclab/control.hpp"
#include "rclab/problem.hpp"
#include "rclab/rng.hpp"

using namespace rclab;

namespace {

Vector scalar(double v) {
    Vector x(1);
    x(0) = v;
    return x;
}

}  // namespace

TEST_CASE("validate_spec accepts the double-well benchmark") {
    const Benchmark bench = benchmark_example1();
    CHECK(validate_spec(bench.spec).empty());
}

TEST_CASE("validate_spec flags a negative singular cost") {
    Benchmark bench = benchmark_example1();
    bench.spec.singular_cost = [](double) { return -Vector::Ones(1); };
    const auto violations = validate_spec(bench.spec);
    REQUIRE_FALSE(violations.empty());
    bool found = false;
    for (const auto& v : violations) found = found || v.find("singular cost") != std::string::npos;
    CHECK(found);
}

TEST_CASE("validate_spec flags a derivative oracle that is off by a factor") {
    Benchmark bench = benchmark_singular();
    bench.spec.oracles.terminal_cost_x = [](const Vector& x) {
        return Vector(scalar(4.0 * (x(0) - 1.0)));  // true gradient is 2(x-1)
    };
    const auto violations = validate_spec(bench.spec);
    REQUIRE_FALSE(violations.empty());
    bool found = false;
    for (const auto& v : violations) found = found || v.find("oracle") != std::string::npos;
    CHECK(found);
}

TEST_CASE("validate_spec flags drift that violates linear growth") {
    Benchmark bench = benchmark_example1();
    bench.spec.drift = [](double, const Vector& x, const Vector&) {
        return Vector(scalar(1e6 * (1.0 + x.squaredNorm())));
    };
    const auto violations = validate_spec(bench.spec);
    bool found = false;
    for (const auto& v : violations) found = found || v.find("linear-growth") != std::string::npos;
    CHECK(found);
}

TEST_CASE("dirac_embed puts mass one on the selected atom") {
    TimeGrid grid(6, 1.0);
    const StrictControl v = StrictControl::constant(0, grid);
    const RelaxedControl q = dirac_embed(v, 2);
    for (const Vector& row : q.weights) {
        CHECK(row(0) == 1.0);
        CHECK(row(1) == 0.0);
    }
}

TEST_CASE("dirac_embed of the alternating control gives alternating one-hot rows") {
    TimeGrid grid(10, 1.0);
    const StrictControl v = alternating_extremes(grid, 0, 1);
    const RelaxedControl q = dirac_embed(v, 2);
    for (int i = 0; i < grid.steps; ++i) {
        const Vector& row = q.weights[static_cast<std::size_t>(i)];
        CHECK(row(i % 2 == 0 ? 0 : 1) == 1.0);
        CHECK(row.sum() == 1.0);
    }
}

TEST_CASE("dirac_embed rejects out-of-range atom indices") {
    TimeGrid grid(3, 1.0);
    StrictControl v = StrictControl::constant(5, grid);
    CHECK_THROWS_AS(dirac_embed(v, 2), InvalidControlError);
}

TEST_CASE("embedding then taking the marginal mean recovers the atom exactly") {
    TimeGrid grid(9, 1.0);
    RandomStream rs(5);
    const std::vector<Vector> atoms = {scalar(-1.0), scalar(0.25), scalar(2.0)};
    StrictControl v;
    for (int i = 0; i < grid.steps; ++i) v.table.push_back(rs.uniform_int(3));
    const RelaxedControl q = dirac_embed(v, 3);
    for (int i = 0; i < grid.steps; ++i) {
        Vector mean = Vector::Zero(1);
        for (int j = 0; j < 3; ++j)
            mean += q.weights[static_cast<std::size_t>(i)](j) * atoms[static_cast<std::size_t>(j)];
        CHECK(mean(0) == atoms[static_cast<std::size_t>(v.table[static_cast<std::size_t>(i)])](0));
    }
}

TEST_CASE("argmax atom extraction inverts the embedding") {
    TimeGrid grid(12, 1.0);
    RandomStream rs(17);
    StrictControl v;
    for (int i = 0; i < grid.steps; ++i) v.table.push_back(rs.uniform_int(4));
    CHECK(argmax_atoms(dirac_embed(v, 4)).table == v.table);
}

TEST_CASE("relaxed drift vanishes at the balanced measure") {
    const Benchmark bench = benchmark_example2(Example2Variant::DeterministicMean);
    Vector w(3);
    w << 0.5, 0.0, 0.5;
    CHECK(relaxed_drift(bench.spec, 0.3, scalar(0.7), w)(0) == 0.0);
}

TEST_CASE("relaxed coefficient at a Dirac row is the atomic value exactly") {
    const Benchmark bench = benchmark_example2(Example2Variant::FullStochastic);
    Vector w = Vector::Zero(3);
    w(2) = 1.0;
    const Vector x = scalar(-0.4);
    CHECK(relaxed_drift(bench.spec, 0.1, x, w)(0) ==
          bench.spec.drift(0.1, x, bench.spec.action_grid[2])(0));
    CHECK(relaxed_running_cost(bench.spec, 0.1, x, w) ==
          bench.spec.running_cost(0.1, x, bench.spec.action_grid[2]));
}

TEST_CASE("relaxed quadratic drift: hand-computed mixture value") {
    ProblemSpec spec = benchmark_example1().spec;
    spec.drift = [](double, const Vector&, const Vector& a) { return Vector(scalar(a(0) * a(0))); };
    Vector w(3);
    w << 0.25, 0.5, 0.25;  // atoms -1, 0, 1
    CHECK(relaxed_drift(spec, 0.0, scalar(0.0), w)(0) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("weight rows off the simplex beyond 1e-9 are rejected") {
    const ProblemSpec spec = benchmark_example1().spec;
    Vector w(3);
    w << 0.6, 0.0, 0.5;
    CHECK_THROWS_AS(relaxed_drift(spec, 0.0, scalar(0.0), w), InvalidMeasureError);
    w << 0.5 + 5e-10, 0.0, 0.5;  // within tolerance
    CHECK_NOTHROW(relaxed_drift(spec, 0.0, scalar(0.0), w));
    w << -1e-6, 0.5, 0.5 + 1e-6;
    CHECK_THROWS_AS(relaxed_drift(spec, 0.0, scalar(0.0), w), InvalidMeasureError);
}

TEST_CASE("relaxed coefficients are affine in the weights") {
    const ProblemSpec spec = benchmark_example2(Example2Variant::FullStochastic).spec;
    RandomStream rs(31);
    for (int trial = 0; trial < 200; ++trial) {
        Vector q1(3), q2(3);
        for (int j = 0; j < 3; ++j) q1(j) = -std::log(rs.uniform());
        for (int j = 0; j < 3; ++j) q2(j) = -std::log(rs.uniform());
        q1 /= q1.sum();
        q2 /= q2.sum();
        const double alpha = rs.uniform();
        const Vector mix = alpha * q1 + (1.0 - alpha) * q2;
        const Vector x = scalar(2.0 * rs.normal());
        const double t = rs.uniform();
        const double lhs = relaxed_running_cost(spec, t, x, mix);
        const double rhs = alpha * relaxed_running_cost(spec, t, x, q1) +
                           (1.0 - alpha) * relaxed_running_cost(spec, t, x, q2);
        CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
        CHECK(relaxed_drift(spec, t, x, mix)(0) ==
              Catch::Approx(alpha * relaxed_drift(spec, t, x, q1)(0) +
                            (1.0 - alpha) * relaxed_drift(spec, t, x, q2)(0))
                  .margin(1e-12));
    }
}

TEST_CASE("singular control invariants: start at zero, nondecreasing, telescoping total") {
    TimeGrid grid(20, 2.0);
    RandomStream rs(8);
    SingularControl eta = SingularControl::zero(grid, 2);
    Vector level = Vector::Zero(2);
    for (int i = 1; i <= grid.steps; ++i) {
        for (int c = 0; c < 2; ++c)
            if (rs.uniform() < 0.3) level(c) += std::abs(rs.normal());
        eta.cumulative[static_cast<std::size_t>(i)] = level;
    }
    CHECK_NOTHROW(eta.validate(grid));
    Vector sum = Vector::Zero(2);
    for (int i = 0; i < grid.steps; ++i) {
        const Vector inc = eta.increment(i);
        CHECK((inc.array() >= 0.0).all());
        sum += inc;
    }
    CHECK((sum - eta.total()).cwiseAbs().maxCoeff() == Catch::Approx(0.0).margin(1e-12));

    SingularControl bad = eta;
    bad.cumulative[5](0) = bad.cumulative[4](0) + 1.0;  // forces a decrease at step 5
    if (bad.cumulative[6](0) < bad.cumulative[5](0)) CHECK_THROWS_AS(bad.validate(grid), InvalidControlError);
}

TEST_CASE("time grid endpoints are exact") {
    TimeGrid grid(7, 3.0);
    CHECK(grid.knot(0) == 0.0);
    CHECK(grid.knot(7) == 3.0);
    for (int i = 0; i < 7; ++i) CHECK(grid.knot(i) < grid.knot(i + 1));
    CHECK_THROWS_AS(TimeGrid(0, 1.0), InvalidInputError);
    CHECK_THROWS_AS(TimeGrid(5, -1.0), InvalidInputError);
}
