#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rclab/control.hpp"
#include "rclab/core.hpp"
#include "rclab/problem.hpp"
#include "rclab/time_grid.hpp"

namespace rclab {

/// Built-in problem with known optimal controls and closed-form reference
/// values for the acceptance checks.
struct Benchmark {
    std::string id;
    ProblemSpec spec;
    std::function<RelaxedControl(const TimeGrid&)> optimal_relaxed;
    std::function<SingularControl(const TimeGrid&)> optimal_singular;
    double optimal_cost = 0.0;
    double cost_tolerance = 0.0;  ///< discretization + Monte Carlo allowance at defaults
    std::string notes;
    /// Closed-form adjoints along the optimal trajectory, when available.
    std::function<double(double, double)> reference_p;  ///< (t, x) -> p
    std::function<double(double)> reference_P;          ///< t -> P
    std::function<double(double)> reference_k;          ///< t -> k
};

namespace detail {

inline std::vector<Vector> scalar_atoms(std::initializer_list<double> values) {
    std::vector<Vector> atoms;
    for (double v : values) {
        Vector a(1);
        a(0) = v;
        atoms.push_back(a);
    }
    return atoms;
}

}  // namespace detail

/// Scalar double-well selection problem: minimize the integral of x^2 under
/// dx = a dt with atoms {-1, 0, 1}. No strict control reaches the infimum 0;
/// the balanced measure on the extreme atoms does. References: J* = 0,
/// optimal mu = (1/2, 0, 1/2), and the order-n chattering satisfies
/// sup |x| <= T/n and J(v^n) <= T^3 / n^2.
inline Benchmark benchmark_example1() {
    Benchmark bench;
    bench.id = "example1";
    bench.notes = "deterministic relaxation gap; J* = 0 at the balanced two-point measure";

    ProblemSpec& spec = bench.spec;
    spec.state_dim = spec.noise_dim = spec.singular_dim = spec.action_dim = 1;
    spec.horizon = 1.0;
    spec.initial_state = Vector::Zero(1);
    spec.action_grid = detail::scalar_atoms({-1.0, 0.0, 1.0});
    spec.zero_diffusion = true;
    spec.drift = [](double, const Vector&, const Vector& a) { return a; };
    spec.diffusion = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 1); };
    spec.singular_gain = [](double) { return Matrix::Zero(1, 1); };
    spec.running_cost = [](double, const Vector& x, const Vector&) { return x(0) * x(0); };
    spec.terminal_cost = [](const Vector&) { return 0.0; };
    spec.singular_cost = [](double) { return Vector::Zero(1); };
    spec.oracles.drift_x = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 1); };
    spec.oracles.diffusion_x = [](double, const Vector&, const Vector&) {
        return MatrixList(1, Matrix::Zero(1, 1));
    };
    spec.oracles.running_cost_x = [](double, const Vector& x, const Vector&) {
        Vector g(1);
        g(0) = 2.0 * x(0);
        return g;
    };
    spec.oracles.terminal_cost_x = [](const Vector&) { return Vector::Zero(1); };
    spec.oracles.terminal_cost_xx = [](const Vector&) { return Matrix::Zero(1, 1); };
    spec.oracles.hamiltonian_xx = [](double, const Vector&, const Vector&, const Vector&,
                                     const Matrix&) { return 2.0 * Matrix::Identity(1, 1); };

    Vector weights(3);
    weights << 0.5, 0.0, 0.5;
    bench.optimal_relaxed = [weights](const TimeGrid& grid) {
        return RelaxedControl::constant(weights, grid);
    };
    bench.optimal_singular = [](const TimeGrid& grid) { return SingularControl::zero(grid, 1); };
    bench.optimal_cost = 0.0;
    bench.cost_tolerance = 1e-12;
    bench.reference_p = [](double, double) { return 0.0; };
    bench.reference_P = [](double) { return 0.0; };
    bench.reference_k = [](double t) { return 2.0 * (1.0 - t); };
    return bench;
}

enum class Example2Variant { DeterministicMean, FullStochastic };

/// Bang-bang action-penalty problem: h = x^2 + (1 - a^2)^2, dx = a dt (+ dW
/// in the stochastic variant), atoms {-1, 0, 1}. The balanced measure on
/// the extremes zeroes both the mean drift and the action penalty.
/// Deterministic-mean references: J* = 0. Full-stochastic references:
/// J(mu) = T^2/2, p_t = 2(T - t) x_t, P_t = 2(T - t), k_t = 2(T - t).
inline Benchmark benchmark_example2(Example2Variant variant) {
    Benchmark bench;
    const bool stochastic = variant == Example2Variant::FullStochastic;
    bench.id = stochastic ? "example2-full" : "example2-mean";
    bench.notes = stochastic ? "linear-quadratic diffusion with action penalty; closed-form adjoints"
                             : "mean dynamics reduction; J* = 0 at the balanced measure";

    ProblemSpec& spec = bench.spec;
    spec.state_dim = spec.noise_dim = spec.singular_dim = spec.action_dim = 1;
    spec.horizon = 1.0;
    spec.initial_state = Vector::Zero(1);
    spec.action_grid = detail::scalar_atoms({-1.0, 0.0, 1.0});
    spec.zero_diffusion = !stochastic;
    spec.drift = [](double, const Vector&, const Vector& a) { return a; };
    const Matrix sigma = stochastic ? Matrix(Matrix::Identity(1, 1)) : Matrix(Matrix::Zero(1, 1));
    spec.diffusion = [sigma](double, const Vector&, const Vector&) { return sigma; };
    spec.singular_gain = [](double) { return Matrix::Zero(1, 1); };
    spec.running_cost = [](double, const Vector& x, const Vector& a) {
        const double penalty = 1.0 - a(0) * a(0);
        return x(0) * x(0) + penalty * penalty;
    };
    spec.terminal_cost = [](const Vector&) { return 0.0; };
    spec.singular_cost = [](double) { return Vector::Zero(1); };
    spec.oracles.drift_x = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 1); };
    spec.oracles.diffusion_x = [](double, const Vector&, const Vector&) {
        return MatrixList(1, Matrix::Zero(1, 1));
    };
    spec.oracles.running_cost_x = [](double, const Vector& x, const Vector&) {
        Vector g(1);
        g(0) = 2.0 * x(0);
        return g;
    };
    spec.oracles.terminal_cost_x = [](const Vector&) { return Vector::Zero(1); };
    spec.oracles.terminal_cost_xx = [](const Vector&) { return Matrix::Zero(1, 1); };
    spec.oracles.hamiltonian_xx = [](double, const Vector&, const Vector&, const Vector&,
                                     const Matrix&) { return 2.0 * Matrix::Identity(1, 1); };

    Vector weights(3);
    weights << 0.5, 0.0, 0.5;
    bench.optimal_relaxed = [weights](const TimeGrid& grid) {
        return RelaxedControl::constant(weights, grid);
    };
    bench.optimal_singular = [](const TimeGrid& grid) { return SingularControl::zero(grid, 1); };
    if (stochastic) {
        bench.optimal_cost = 0.5;  // E int_0^T W_t^2 dt = T^2 / 2
        bench.cost_tolerance = 0.05;
        bench.reference_p = [](double t, double x) { return 2.0 * (1.0 - t) * x; };
        bench.reference_P = [](double t) { return 2.0 * (1.0 - t); };
        bench.reference_k = [](double t) { return 2.0 * (1.0 - t); };
    } else {
        bench.optimal_cost = 0.0;
        bench.cost_tolerance = 1e-12;
        bench.reference_p = [](double, double) { return 0.0; };
        bench.reference_P = [](double) { return 0.0; };
        bench.reference_k = [](double t) { return 2.0 * (1.0 - t); };
    }
    return bench;
}

/// Purely singular benchmark with every quantity closed-form: dx = deta,
/// g(x) = (x - 1)^2, l = kappa = 1. Minimizing (y - 1)^2 + kappa*y over
/// y >= 0 gives the single optimal jump y* = 1 - kappa/2 = 0.5 at t = 0,
/// J* = 0.75, p = -kappa, and l + G*p = 0 on all of [0, T].
inline Benchmark benchmark_singular() {
    Benchmark bench;
    bench.id = "singular";
    bench.notes = "analytic one-jump target for the singular optimality conditions";

    ProblemSpec& spec = bench.spec;
    spec.state_dim = spec.noise_dim = spec.singular_dim = 1;
    spec.action_dim = 1;
    spec.horizon = 1.0;
    spec.initial_state = Vector::Zero(1);
    spec.action_grid = detail::scalar_atoms({0.0});
    spec.zero_diffusion = true;
    spec.drift = [](double, const Vector&, const Vector&) { return Vector::Zero(1); };
    spec.diffusion = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 1); };
    spec.singular_gain = [](double) { return Matrix::Identity(1, 1); };
    spec.running_cost = [](double, const Vector&, const Vector&) { return 0.0; };
    spec.terminal_cost = [](const Vector& x) { return (x(0) - 1.0) * (x(0) - 1.0); };
    spec.singular_cost = [](double) { return Vector::Ones(1); };
    spec.oracles.drift_x = [](double, const Vector&, const Vector&) { return Matrix::Zero(1, 1); };
    spec.oracles.diffusion_x = [](double, const Vector&, const Vector&) {
        return MatrixList(1, Matrix::Zero(1, 1));
    };
    spec.oracles.running_cost_x = [](double, const Vector&, const Vector&) {
        return Vector::Zero(1);
    };
    spec.oracles.terminal_cost_x = [](const Vector& x) {
        Vector g(1);
        g(0) = 2.0 * (x(0) - 1.0);
        return g;
    };
    spec.oracles.terminal_cost_xx = [](const Vector&) { return 2.0 * Matrix::Identity(1, 1); };
    spec.oracles.hamiltonian_xx = [](double, const Vector&, const Vector&, const Vector&,
                                     const Matrix&) { return Matrix::Zero(1, 1); };

    bench.optimal_relaxed = [](const TimeGrid& grid) {
        return RelaxedControl::constant(Vector::Ones(1), grid);
    };
    bench.optimal_singular = [](const TimeGrid& grid) {
        return SingularControl::single_jump(grid, 0.5 * Vector::Ones(1), 0);
    };
    bench.optimal_cost = 0.75;
    bench.cost_tolerance = 1e-12;
    bench.reference_p = [](double, double) { return -1.0; };
    bench.reference_P = [](double) { return 0.0; };
    bench.reference_k = [](double) { return 2.0; };
    return bench;
}

inline std::vector<std::string> benchmark_ids() {
    return {"example1", "example2-mean", "example2-full", "singular"};
}

inline Benchmark make_benchmark(const std::string& id) {
    if (id == "example1") return benchmark_example1();
    if (id == "example2-mean") return benchmark_example2(Example2Variant::DeterministicMean);
    if (id == "example2-full") return benchmark_example2(Example2Variant::FullStochastic);
    if (id == "singular") return benchmark_singular();
    throw InvalidInputError("unknown benchmark id: " + id);
}

/// The alternating extreme-atom control of order n on an n-step grid over
/// [0, T]: the canonical chattering sequence for the balanced two-point
/// measure (atom order -1, +1, -1, ...).
inline StrictControl alternating_extremes(const TimeGrid& grid, int minus_atom, int plus_atom) {
    StrictControl v;
    v.table.reserve(static_cast<std::size_t>(grid.steps));
    for (int i = 0; i < grid.steps; ++i)
        v.table.push_back(i % 2 == 0 ? minus_atom : plus_atom);
    return v;
}

}  // namespace rclab
