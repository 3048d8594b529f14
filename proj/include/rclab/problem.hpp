#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rclab/core.hpp"
#include "rclab/rng.hpp"
#include "rclab/time_grid.hpp"

namespace rclab {

using DriftFn = std::function<Vector(double, const Vector&, const Vector&)>;
using DiffusionFn = std::function<Matrix(double, const Vector&, const Vector&)>;
using SingularGainFn = std::function<Matrix(double)>;
using RunningCostFn = std::function<double(double, const Vector&, const Vector&)>;
using TerminalCostFn = std::function<double(const Vector&)>;
using SingularCostFn = std::function<Vector(double)>;

/// Optional analytic derivatives. Any provider left empty falls back to
/// central finite differences of the base coefficient.
struct DerivativeOracles {
    /// Jacobian of the drift: entry (i, j) = d b_i / d x_j, n x n.
    std::function<Matrix(double, const Vector&, const Vector&)> drift_x;
    /// Per noise column l, the n x n matrix with entry (i, j) = d sigma_{il} / d x_j.
    std::function<MatrixList(double, const Vector&, const Vector&)> diffusion_x;
    /// Gradient of the running cost in x.
    std::function<Vector(double, const Vector&, const Vector&)> running_cost_x;
    /// Gradient of the terminal cost.
    std::function<Vector(const Vector&)> terminal_cost_x;
    /// Hessian of the terminal cost.
    std::function<Matrix(const Vector&)> terminal_cost_xx;
    /// Hessian in x of the Hamiltonian h + p.b + sigma.P at (t, x, a, p, P).
    std::function<Matrix(double, const Vector&, const Vector&, const Vector&, const Matrix&)>
        hamiltonian_xx;
};

/// Data model of one mixed relaxed-singular control problem: coefficients,
/// dimensions, horizon and the finite action grid. Immutable after
/// construction; coefficient functions must be pure.
struct ProblemSpec {
    int state_dim = 1;     ///< n
    int noise_dim = 1;     ///< d
    int singular_dim = 1;  ///< m
    int action_dim = 1;    ///< k

    double horizon = 1.0;  ///< T
    Vector initial_state;  ///< x0

    std::vector<Vector> action_grid;  ///< atoms a_1..a_M in R^k

    DriftFn drift;                 ///< b(t, x, a)
    DiffusionFn diffusion;         ///< sigma(t, x, a)
    SingularGainFn singular_gain;  ///< G(t)
    RunningCostFn running_cost;    ///< h(t, x, a)
    TerminalCostFn terminal_cost;  ///< g(x)
    SingularCostFn singular_cost;  ///< l(t), componentwise >= 0

    DerivativeOracles oracles;

    /// Set when the diffusion is identically zero; backward solvers then use
    /// exact integration instead of Monte Carlo regression.
    bool zero_diffusion = false;

    int atom_count() const { return static_cast<int>(action_grid.size()); }

    double fd_step(const Vector& x) const { return 1e-5 * (1.0 + x.norm()); }
    double fd_step_hessian(const Vector& x) const { return 1e-4 * (1.0 + x.norm()); }

    /// d b / d x, analytic when provided, else central differences per column.
    Matrix drift_jacobian(double t, const Vector& x, const Vector& a) const {
        if (oracles.drift_x) return oracles.drift_x(t, x, a);
        const double h = fd_step(x);
        Matrix jac(state_dim, state_dim);
        Vector xp = x, xm = x;
        for (int j = 0; j < state_dim; ++j) {
            xp(j) = x(j) + h;
            xm(j) = x(j) - h;
            jac.col(j) = (drift(t, xp, a) - drift(t, xm, a)) / (2.0 * h);
            xp(j) = x(j);
            xm(j) = x(j);
        }
        return jac;
    }

    /// d sigma / d x as one n x n matrix per noise column.
    MatrixList diffusion_jacobian(double t, const Vector& x, const Vector& a) const {
        if (oracles.diffusion_x) return oracles.diffusion_x(t, x, a);
        const double h = fd_step(x);
        MatrixList jac(static_cast<std::size_t>(noise_dim),
                       Matrix::Zero(state_dim, state_dim));
        Vector xp = x, xm = x;
        for (int j = 0; j < state_dim; ++j) {
            xp(j) = x(j) + h;
            xm(j) = x(j) - h;
            const Matrix diff = (diffusion(t, xp, a) - diffusion(t, xm, a)) / (2.0 * h);
            for (int l = 0; l < noise_dim; ++l) jac[static_cast<std::size_t>(l)].col(j) = diff.col(l);
            xp(j) = x(j);
            xm(j) = x(j);
        }
        return jac;
    }

    Vector running_cost_gradient(double t, const Vector& x, const Vector& a) const {
        if (oracles.running_cost_x) return oracles.running_cost_x(t, x, a);
        const double h = fd_step(x);
        Vector grad(state_dim);
        Vector xp = x, xm = x;
        for (int j = 0; j < state_dim; ++j) {
            xp(j) = x(j) + h;
            xm(j) = x(j) - h;
            grad(j) = (running_cost(t, xp, a) - running_cost(t, xm, a)) / (2.0 * h);
            xp(j) = x(j);
            xm(j) = x(j);
        }
        return grad;
    }

    Vector terminal_gradient(const Vector& x) const {
        if (oracles.terminal_cost_x) return oracles.terminal_cost_x(x);
        const double h = fd_step(x);
        Vector grad(state_dim);
        Vector xp = x, xm = x;
        for (int j = 0; j < state_dim; ++j) {
            xp(j) = x(j) + h;
            xm(j) = x(j) - h;
            grad(j) = (terminal_cost(xp) - terminal_cost(xm)) / (2.0 * h);
            xp(j) = x(j);
            xm(j) = x(j);
        }
        return grad;
    }

    Matrix terminal_hessian(const Vector& x) const {
        if (oracles.terminal_cost_xx) return oracles.terminal_cost_xx(x);
        const double h = fd_step_hessian(x);
        Matrix hess(state_dim, state_dim);
        const double f0 = terminal_cost(x);
        Vector xs = x;
        for (int j = 0; j < state_dim; ++j) {
            xs(j) = x(j) + h;
            const double fp = terminal_cost(xs);
            xs(j) = x(j) - h;
            const double fm = terminal_cost(xs);
            xs(j) = x(j);
            hess(j, j) = (fp - 2.0 * f0 + fm) / (h * h);
            for (int l = j + 1; l < state_dim; ++l) {
                xs(j) = x(j) + h; xs(l) = x(l) + h;
                const double fpp = terminal_cost(xs);
                xs(l) = x(l) - h;
                const double fpm = terminal_cost(xs);
                xs(j) = x(j) - h; xs(l) = x(l) + h;
                const double fmp = terminal_cost(xs);
                xs(l) = x(l) - h;
                const double fmm = terminal_cost(xs);
                xs(j) = x(j); xs(l) = x(l);
                hess(j, l) = hess(l, j) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            }
        }
        return hess;
    }
};

/// Knobs for validate_spec. `growth_constant` is the C of the linear-growth
/// sample check |b| <= C (1 + |x| + |v|).
struct ValidationConfig {
    double growth_constant = 10.0;
    int probe_points = 32;
    double probe_radius = 5.0;
    double oracle_tolerance = 1e-5;
    std::uint64_t seed = 12345;
};

namespace detail {

inline double rel_error(double diff, double ref) {
    return diff / std::max(1.0, std::abs(ref));
}

inline double rel_error(const Eigen::Ref<const Matrix>& diff,
                        const Eigen::Ref<const Matrix>& ref) {
    return diff.cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff());
}

}  // namespace detail

/// Check the ProblemSpec invariants on a sampled probe set. Violations are
/// returned as data, not thrown.
inline std::vector<std::string> validate_spec(const ProblemSpec& spec,
                                              const ValidationConfig& cfg = {}) {
    std::vector<std::string> violations;

    if (spec.action_grid.empty()) violations.push_back("action grid empty");
    for (std::size_t j = 0; j < spec.action_grid.size(); ++j) {
        const Vector& a = spec.action_grid[j];
        if (a.size() != spec.action_dim)
            violations.push_back("action grid atom " + std::to_string(j) + " has wrong dimension");
        else if (!a.allFinite())
            violations.push_back("action grid atom " + std::to_string(j) + " not finite");
    }
    if (!(spec.horizon > 0.0) || !std::isfinite(spec.horizon))
        violations.push_back("horizon not finite and positive");
    if (spec.initial_state.size() != spec.state_dim)
        violations.push_back("initial state has wrong dimension");

    if (!violations.empty()) return violations;

    RandomStream rs(cfg.seed);
    auto random_state = [&] {
        Vector x(spec.state_dim);
        for (int i = 0; i < spec.state_dim; ++i) x(i) = cfg.probe_radius * rs.normal();
        return x;
    };

    bool singular_cost_ok = true;
    bool growth_ok = true;
    bool zero_diffusion_ok = true;
    for (int s = 0; s < cfg.probe_points; ++s) {
        const double t = rs.uniform(0.0, spec.horizon);
        const Vector x = random_state();
        const Vector& a = spec.action_grid[static_cast<std::size_t>(rs.uniform_int(spec.atom_count()))];

        const Vector l = spec.singular_cost(t);
        if (l.size() != spec.singular_dim || (l.array() < 0.0).any()) singular_cost_ok = false;

        const double bound = cfg.growth_constant * (1.0 + x.norm() + a.norm());
        if (spec.drift(t, x, a).norm() > bound) growth_ok = false;
        const Matrix sig = spec.diffusion(t, x, a);
        if (sig.norm() > bound) growth_ok = false;
        if (spec.zero_diffusion && sig.cwiseAbs().maxCoeff() != 0.0) zero_diffusion_ok = false;
    }
    if (!singular_cost_ok) violations.push_back("singular cost negative or mis-sized on probe set");
    if (!growth_ok) violations.push_back("drift/diffusion exceed linear-growth bound on probe set");
    if (!zero_diffusion_ok) violations.push_back("zero_diffusion flag set but diffusion nonzero on probe set");

    // Oracle agreement against central finite differences.
    double worst = 0.0;
    auto fd_spec = spec;  // copy without oracles: forces the FD path
    fd_spec.oracles = DerivativeOracles{};
    for (int s = 0; s < std::min(cfg.probe_points, 8); ++s) {
        const double t = rs.uniform(0.0, spec.horizon);
        const Vector x = random_state();
        const Vector& a = spec.action_grid[static_cast<std::size_t>(rs.uniform_int(spec.atom_count()))];

        if (spec.oracles.drift_x)
            worst = std::max(worst, detail::rel_error(
                spec.oracles.drift_x(t, x, a) - fd_spec.drift_jacobian(t, x, a),
                fd_spec.drift_jacobian(t, x, a)));
        if (spec.oracles.diffusion_x) {
            const MatrixList ana = spec.oracles.diffusion_x(t, x, a);
            const MatrixList fd = fd_spec.diffusion_jacobian(t, x, a);
            for (int l = 0; l < spec.noise_dim; ++l)
                worst = std::max(worst, detail::rel_error(
                    ana[static_cast<std::size_t>(l)] - fd[static_cast<std::size_t>(l)],
                    fd[static_cast<std::size_t>(l)]));
        }
        if (spec.oracles.running_cost_x)
            worst = std::max(worst, detail::rel_error(
                spec.oracles.running_cost_x(t, x, a) - fd_spec.running_cost_gradient(t, x, a),
                fd_spec.running_cost_gradient(t, x, a)));
        if (spec.oracles.terminal_cost_x)
            worst = std::max(worst, detail::rel_error(
                spec.oracles.terminal_cost_x(x) - fd_spec.terminal_gradient(x),
                fd_spec.terminal_gradient(x)));
        if (spec.oracles.terminal_cost_xx)
            worst = std::max(worst, detail::rel_error(
                spec.oracles.terminal_cost_xx(x) - fd_spec.terminal_hessian(x),
                fd_spec.terminal_hessian(x)));
    }
    if (worst > cfg.oracle_tolerance)
        violations.push_back("derivative oracle mismatch with finite differences (rel error " +
                             std::to_string(worst) + ")");

    return violations;
}

}  // namespace rclab
