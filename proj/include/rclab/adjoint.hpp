#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <type_traits>
#include <variant>
#include <vector>

#include "rclab/control.hpp"
#include "rclab/core.hpp"
#include "rclab/hamiltonian.hpp"
#include "rclab/noise.hpp"
#include "rclab/parallel.hpp"
#include "rclab/problem.hpp"
#include "rclab/regression.hpp"
#include "rclab/simulate.hpp"
#include "rclab/time_grid.hpp"

namespace rclab {

/// First-order adjoint pair on the grid: p[path][knot] in R^n and
/// P[path][knot] in R^{n x d}. Terminal condition p_N = g_x(x_N) holds
/// exactly by construction.
struct FirstOrderAdjoint {
    int paths = 0;
    int steps = 0;
    int state_dim = 0;
    int noise_dim = 0;
    std::vector<double> p_data;  ///< paths x (steps+1) x n
    std::vector<double> P_data;  ///< paths x (steps+1) x (n*d)

    Eigen::Map<const Vector> p(int path, int knot) const {
        return Eigen::Map<const Vector>(
            p_data.data() + (static_cast<std::size_t>(path) * (steps + 1) + knot) * state_dim,
            state_dim);
    }
    Eigen::Map<Vector> p(int path, int knot) {
        return Eigen::Map<Vector>(
            p_data.data() + (static_cast<std::size_t>(path) * (steps + 1) + knot) * state_dim,
            state_dim);
    }
    Eigen::Map<const Matrix> P(int path, int knot) const {
        return Eigen::Map<const Matrix>(
            P_data.data() +
                (static_cast<std::size_t>(path) * (steps + 1) + knot) * state_dim * noise_dim,
            state_dim, noise_dim);
    }
    Eigen::Map<Matrix> P(int path, int knot) {
        return Eigen::Map<Matrix>(
            P_data.data() +
                (static_cast<std::size_t>(path) * (steps + 1) + knot) * state_dim * noise_dim,
            state_dim, noise_dim);
    }
};

/// Second-order adjoint pair: k[path][knot] in R^{n x n} and K[path][knot]
/// as d matrices of size n x n. Terminal condition k_N = g_xx(x_N).
struct SecondOrderAdjoint {
    int paths = 0;
    int steps = 0;
    int state_dim = 0;
    int noise_dim = 0;
    std::vector<double> k_data;  ///< paths x (steps+1) x (n*n)
    std::vector<double> K_data;  ///< paths x (steps+1) x (d*n*n)

    Eigen::Map<const Matrix> k(int path, int knot) const {
        return Eigen::Map<const Matrix>(
            k_data.data() +
                (static_cast<std::size_t>(path) * (steps + 1) + knot) * state_dim * state_dim,
            state_dim, state_dim);
    }
    Eigen::Map<Matrix> k(int path, int knot) {
        return Eigen::Map<Matrix>(
            k_data.data() +
                (static_cast<std::size_t>(path) * (steps + 1) + knot) * state_dim * state_dim,
            state_dim, state_dim);
    }
    Eigen::Map<const Matrix> K(int path, int knot, int noise_col) const {
        return Eigen::Map<const Matrix>(
            K_data.data() + ((static_cast<std::size_t>(path) * (steps + 1) + knot) * noise_dim +
                             noise_col) *
                                state_dim * state_dim,
            state_dim, state_dim);
    }
    Eigen::Map<Matrix> K(int path, int knot, int noise_col) {
        return Eigen::Map<Matrix>(
            K_data.data() + ((static_cast<std::size_t>(path) * (steps + 1) + knot) * noise_dim +
                             noise_col) *
                                state_dim * state_dim,
            state_dim, state_dim);
    }
};

namespace detail {

/// Per-(path, step) control lookup shared by the strict and relaxed solvers.
struct ControlView {
    const ProblemSpec* spec = nullptr;
    const StrictControl* strict = nullptr;
    const RelaxedControl* relaxed = nullptr;

    Vector hx(double t, const Vector& x, int step, const Vector& p, const Matrix& P) const {
        if (strict != nullptr) {
            const int atom = strict->atom_index(step, t, x);
            return hamiltonian_gradient(*spec, t, x,
                                        spec->action_grid[static_cast<std::size_t>(atom)], p, P);
        }
        return relaxed_hamiltonian_gradient(*spec, t, x, relaxed->weight_row(step, t, x), p, P);
    }

    Matrix hxx(double t, const Vector& x, int step, const Vector& p, const Matrix& P) const {
        if (strict != nullptr) {
            const int atom = strict->atom_index(step, t, x);
            return hamiltonian_hessian(*spec, t, x,
                                       spec->action_grid[static_cast<std::size_t>(atom)], p, P);
        }
        return relaxed_hamiltonian_hessian(*spec, t, x, relaxed->weight_row(step, t, x), p, P);
    }

    Matrix drift_jac(double t, const Vector& x, int step) const {
        if (strict != nullptr) {
            const int atom = strict->atom_index(step, t, x);
            return spec->drift_jacobian(t, x, spec->action_grid[static_cast<std::size_t>(atom)]);
        }
        const Vector w = relaxed->weight_row(step, t, x);
        Matrix jac = Matrix::Zero(spec->state_dim, spec->state_dim);
        for (int j = 0; j < spec->atom_count(); ++j)
            if (w(j) != 0.0)
                jac += w(j) * spec->drift_jacobian(t, x, spec->action_grid[static_cast<std::size_t>(j)]);
        return jac;
    }

    MatrixList diffusion_jac(double t, const Vector& x, int step) const {
        if (strict != nullptr) {
            const int atom = strict->atom_index(step, t, x);
            return spec->diffusion_jacobian(t, x, spec->action_grid[static_cast<std::size_t>(atom)]);
        }
        const Vector w = relaxed->weight_row(step, t, x);
        MatrixList jac(static_cast<std::size_t>(spec->noise_dim),
                       Matrix::Zero(spec->state_dim, spec->state_dim));
        for (int j = 0; j < spec->atom_count(); ++j) {
            if (w(j) == 0.0) continue;
            const MatrixList atom_jac =
                spec->diffusion_jacobian(t, x, spec->action_grid[static_cast<std::size_t>(j)]);
            for (int l = 0; l < spec->noise_dim; ++l)
                jac[static_cast<std::size_t>(l)] += w(j) * atom_jac[static_cast<std::size_t>(l)];
        }
        return jac;
    }
};

inline void check_adjoint_inputs(const ProblemSpec& spec, const TimeGrid& grid,
                                 const TrajectoryEnsemble& traj, const NoiseEnsemble& noise,
                                 const RegressionBasis& basis) {
    if (traj.steps != grid.steps)
        throw InconsistentInputError("adjoint: trajectory steps != grid steps");
    if (traj.state_dim != spec.state_dim)
        throw InconsistentInputError("adjoint: trajectory state dimension mismatch");
    if (noise.steps != grid.steps || noise.paths != traj.paths)
        throw InconsistentInputError("adjoint: noise ensemble does not match trajectories");
    if (!spec.zero_diffusion &&
        basis.feature_count(spec.state_dim) > traj.paths / 10)
        throw InvalidInputError("adjoint: feature count exceeds paths/10 (over-fit guard)");
}

/// Build the feature matrix over paths at one knot.
inline Matrix feature_matrix(const RegressionBasis& basis, const TrajectoryEnsemble& traj,
                             int knot) {
    const int b = basis.feature_count(traj.state_dim);
    Matrix phi(traj.paths, b);
    for (int p = 0; p < traj.paths; ++p) phi.row(p) = basis.features(traj.state(p, knot));
    return phi;
}

/// Rethrow-after-join guard for divergence detected inside worker threads.
struct DivergenceFlag {
    std::atomic<bool> hit{false};
    std::atomic<int> path{-1};
    std::atomic<int> step{-1};
    void record(int p, int i) {
        bool expected = false;
        if (hit.compare_exchange_strong(expected, true)) {
            path = p;
            step = i;
        }
    }
    void check(const char* what) const {
        if (hit) throw SimulationDivergedError(what, path, step);
    }
};

}  // namespace detail

/// Backward least-squares Monte Carlo solve of the first-order adjoint BSDE
///   -dp = H_x(t, x, u, p, P) dt - P dW,  p_T = g_x(x_T).
/// P is estimated per step by regressing the centered next-step adjoint
/// against normalized noise increments (the martingale-representation
/// estimator); centering against the fitted conditional mean removes the
/// O(1/sqrt(paths dt)) noise a raw estimator would leave when p is constant.
/// Deterministic problems (zero diffusion) bypass regression and integrate
/// the ODE exactly.
template <typename ControlT>
FirstOrderAdjoint solve_first_order(const ProblemSpec& spec, const TimeGrid& grid,
                                    const TrajectoryEnsemble& traj, const ControlT& control,
                                    const NoiseEnsemble& noise, const RegressionBasis& basis,
                                    int workers = 0) {
    detail::check_adjoint_inputs(spec, grid, traj, noise, basis);
    control.validate(grid, spec.atom_count());
    detail::ControlView view;
    view.spec = &spec;
    if constexpr (std::is_same_v<ControlT, StrictControl>) view.strict = &control;
    else view.relaxed = &control;

    FirstOrderAdjoint adj;
    adj.paths = traj.paths;
    adj.steps = grid.steps;
    adj.state_dim = spec.state_dim;
    adj.noise_dim = spec.noise_dim;
    adj.p_data.resize(static_cast<std::size_t>(traj.paths) * (grid.steps + 1) * spec.state_dim);
    adj.P_data.resize(static_cast<std::size_t>(traj.paths) * (grid.steps + 1) * spec.state_dim *
                      spec.noise_dim);

    const int n = spec.state_dim;
    const int d = spec.noise_dim;

    parallel_for(0, traj.paths, workers, [&](int p) {
        adj.p(p, grid.steps) = spec.terminal_gradient(traj.state(p, grid.steps));
        adj.P(p, grid.steps).setZero();
    });

    for (int i = grid.steps - 1; i >= 0; --i) {
        const double t = grid.knot(i);
        const double dt = grid.step_length(i);

        if (spec.zero_diffusion) {
            detail::DivergenceFlag flag;
            parallel_for(0, traj.paths, workers, [&](int p) {
                const Vector x = traj.state(p, i);
                const Vector p_next = adj.p(p, i + 1);
                adj.P(p, i).setZero();
                adj.p(p, i) =
                    p_next + view.hx(t, x, i, p_next, Matrix::Zero(n, d)) * dt;
                if (!adj.p(p, i).allFinite()) flag.record(p, i);
            });
            flag.check("first-order adjoint diverged");
            continue;
        }

        const Matrix phi = detail::feature_matrix(basis, traj, i);

        // Conditional mean of p_{i+1} given x_i (the centering projection).
        Matrix p_next(traj.paths, n);
        for (int p = 0; p < traj.paths; ++p) p_next.row(p) = adj.p(p, i + 1).transpose();
        const Matrix p_mean = regress_fitted_intercept(phi, p_next, basis.ridge);

        // Martingale part: regress centered increments against dW / dt.
        Matrix z_targets(traj.paths, n * d);
        for (int p = 0; p < traj.paths; ++p) {
            const auto dw = noise.increment(p, i);
            const Eigen::RowVectorXd centered = p_next.row(p) - p_mean.row(p);
            for (int l = 0; l < d; ++l)
                z_targets.row(p).segment(l * n, n) = centered * (dw(l) / dt);
        }
        const Matrix z_fit = regress_fitted_intercept(phi, z_targets, basis.ridge);

        // Driver step: p_i = E[p_{i+1} + H_x dt | x_i].
        Matrix drv_targets(traj.paths, n);
        parallel_for(0, traj.paths, workers, [&](int p) {
            Matrix P_i(n, d);
            for (int l = 0; l < d; ++l) P_i.col(l) = z_fit.row(p).segment(l * n, n).transpose();
            const Vector x = traj.state(p, i);
            const Vector hx = view.hx(t, x, i, Vector(adj.p(p, i + 1)), P_i);
            drv_targets.row(p) = p_next.row(p) + hx.transpose() * dt;
            adj.P(p, i) = P_i;
        });
        const Matrix p_fit = regress_fitted_intercept(phi, drv_targets, basis.ridge);
        detail::DivergenceFlag flag;
        parallel_for(0, traj.paths, workers, [&](int p) {
            adj.p(p, i) = p_fit.row(p).transpose();
            if (!adj.p(p, i).allFinite() || !adj.P(p, i).allFinite()) flag.record(p, i);
        });
        flag.check("first-order adjoint diverged");
    }
    return adj;
}

/// Backward solve of the second-order adjoint BSDE
///   -dk = [b_x* k + k b_x + sigma_x* k sigma_x + sigma_x* K + K sigma_x
///          + H_xx] dt - K dW,  k_T = g_xx(x_T),
/// with K estimated per noise coordinate by centered regression, mirroring
/// the first-order solver.
template <typename ControlT>
SecondOrderAdjoint solve_second_order(const ProblemSpec& spec, const TimeGrid& grid,
                                      const TrajectoryEnsemble& traj, const ControlT& control,
                                      const NoiseEnsemble& noise, const RegressionBasis& basis,
                                      const FirstOrderAdjoint& first, int workers = 0) {
    detail::check_adjoint_inputs(spec, grid, traj, noise, basis);
    control.validate(grid, spec.atom_count());
    if (first.paths != traj.paths || first.steps != grid.steps)
        throw InconsistentInputError("second-order adjoint: first-order solution does not match");
    detail::ControlView view;
    view.spec = &spec;
    if constexpr (std::is_same_v<ControlT, StrictControl>) view.strict = &control;
    else view.relaxed = &control;

    SecondOrderAdjoint adj;
    adj.paths = traj.paths;
    adj.steps = grid.steps;
    adj.state_dim = spec.state_dim;
    adj.noise_dim = spec.noise_dim;
    const int n = spec.state_dim;
    const int d = spec.noise_dim;
    adj.k_data.resize(static_cast<std::size_t>(traj.paths) * (grid.steps + 1) * n * n);
    adj.K_data.resize(static_cast<std::size_t>(traj.paths) * (grid.steps + 1) * d * n * n);

    parallel_for(0, traj.paths, workers, [&](int p) {
        adj.k(p, grid.steps) = spec.terminal_hessian(traj.state(p, grid.steps));
        for (int l = 0; l < d; ++l) adj.K(p, grid.steps, l).setZero();
    });

    auto driver = [&](int p, int i, double t, const Matrix& k_next) {
        const Vector x = traj.state(p, i);
        const Matrix b_x = view.drift_jac(t, x, i);
        const MatrixList sig_x = view.diffusion_jac(t, x, i);
        Matrix drv = b_x.transpose() * k_next + k_next * b_x;
        for (int l = 0; l < d; ++l) {
            const Matrix& sl = sig_x[static_cast<std::size_t>(l)];
            drv += sl.transpose() * k_next * sl;
            drv += sl.transpose() * adj.K(p, i, l) + adj.K(p, i, l) * sl;
        }
        drv += view.hxx(t, x, i, Vector(first.p(p, i)), Matrix(first.P(p, i)));
        return drv;
    };

    for (int i = grid.steps - 1; i >= 0; --i) {
        const double t = grid.knot(i);
        const double dt = grid.step_length(i);

        if (spec.zero_diffusion) {
            detail::DivergenceFlag flag;
            parallel_for(0, traj.paths, workers, [&](int p) {
                for (int l = 0; l < d; ++l) adj.K(p, i, l).setZero();
                const Matrix k_next = adj.k(p, i + 1);
                adj.k(p, i) = k_next + driver(p, i, t, k_next) * dt;
                if (!adj.k(p, i).allFinite()) flag.record(p, i);
            });
            flag.check("second-order adjoint diverged");
            continue;
        }

        const Matrix phi = detail::feature_matrix(basis, traj, i);

        Matrix k_next(traj.paths, n * n);
        for (int p = 0; p < traj.paths; ++p)
            k_next.row(p) = Eigen::Map<const Eigen::RowVectorXd>(adj.k(p, i + 1).data(), n * n);
        const Matrix k_mean = regress_fitted_intercept(phi, k_next, basis.ridge);

        Matrix z_targets(traj.paths, d * n * n);
        for (int p = 0; p < traj.paths; ++p) {
            const auto dw = noise.increment(p, i);
            const Eigen::RowVectorXd centered = k_next.row(p) - k_mean.row(p);
            for (int l = 0; l < d; ++l)
                z_targets.row(p).segment(l * n * n, n * n) = centered * (dw(l) / dt);
        }
        const Matrix z_fit = regress_fitted_intercept(phi, z_targets, basis.ridge);
        parallel_for(0, traj.paths, workers, [&](int p) {
            const Eigen::RowVectorXd row = z_fit.row(p);
            for (int l = 0; l < d; ++l)
                adj.K(p, i, l) = Eigen::Map<const Matrix>(row.data() + l * n * n, n, n);
        });

        Matrix drv_targets(traj.paths, n * n);
        parallel_for(0, traj.paths, workers, [&](int p) {
            const Matrix kn = adj.k(p, i + 1);
            const Matrix target = kn + driver(p, i, t, kn) * dt;
            drv_targets.row(p) = Eigen::Map<const Eigen::RowVectorXd>(target.data(), n * n);
        });
        const Matrix k_fit = regress_fitted_intercept(phi, drv_targets, basis.ridge);
        detail::DivergenceFlag flag;
        parallel_for(0, traj.paths, workers, [&](int p) {
            const Eigen::RowVectorXd row = k_fit.row(p);
            adj.k(p, i) = Eigen::Map<const Matrix>(row.data(), n, n);
            if (!adj.k(p, i).allFinite()) flag.record(p, i);
        });
        flag.check("second-order adjoint diverged");
    }
    return adj;
}

/// Coupled stability gap between adjoints solved under a chattering control
/// and under its source relaxed control on the same grid:
///   E[sup_t |p^n - p^mu|^2] + E int |P^n - P^mu|^2 dt, and the (k, K)
/// analogue.
struct AdjointGap {
    double first_order = 0.0;
    double first_order_stderr = 0.0;
    double second_order = 0.0;
    double second_order_stderr = 0.0;
};

inline AdjointGap adjoint_stability_gap(const FirstOrderAdjoint& first_n,
                                        const SecondOrderAdjoint& second_n,
                                        const FirstOrderAdjoint& first_mu,
                                        const SecondOrderAdjoint& second_mu,
                                        const TimeGrid& grid) {
    if (first_n.steps != first_mu.steps || first_n.paths != first_mu.paths ||
        second_n.steps != second_mu.steps || second_n.paths != second_mu.paths ||
        first_n.steps != grid.steps || second_n.steps != grid.steps)
        throw InconsistentInputError("adjoint_stability_gap: grid or path-count mismatch");

    const int paths = first_n.paths;
    std::vector<double> gap1(static_cast<std::size_t>(paths));
    std::vector<double> gap2(static_cast<std::size_t>(paths));
    for (int p = 0; p < paths; ++p) {
        double sup_p = 0.0, int_P = 0.0, sup_k = 0.0, int_K = 0.0;
        for (int i = 0; i <= grid.steps; ++i) {
            sup_p = std::max(sup_p, (first_n.p(p, i) - first_mu.p(p, i)).squaredNorm());
            sup_k = std::max(sup_k, (second_n.k(p, i) - second_mu.k(p, i)).squaredNorm());
            if (i < grid.steps) {
                const double dt = grid.step_length(i);
                int_P += (first_n.P(p, i) - first_mu.P(p, i)).squaredNorm() * dt;
                for (int l = 0; l < first_n.noise_dim; ++l)
                    int_K += (second_n.K(p, i, l) - second_mu.K(p, i, l)).squaredNorm() * dt;
            }
        }
        gap1[static_cast<std::size_t>(p)] = sup_p + int_P;
        gap2[static_cast<std::size_t>(p)] = sup_k + int_K;
    }
    AdjointGap gap;
    const CostEstimate e1 = detail::reduce_cost(gap1, 0);
    const CostEstimate e2 = detail::reduce_cost(gap2, 0);
    gap.first_order = e1.mean;
    gap.first_order_stderr = e1.stderr_;
    gap.second_order = e2.mean;
    gap.second_order_stderr = e2.stderr_;
    return gap;
}

/// Worst relative disagreement between the assembled analytic H_x / H_xx and
/// central finite differences of the Hamiltonian value, over a seeded probe
/// set. Large values flag a wrong derivative oracle.
inline double hx_finite_difference_check(const ProblemSpec& spec, int sample_points = 16,
                                         std::uint64_t seed = 2024) {
    RandomStream rs(seed);
    double worst = 0.0;
    for (int s = 0; s < sample_points; ++s) {
        const double t = rs.uniform(0.0, spec.horizon);
        Vector x(spec.state_dim);
        for (int i = 0; i < spec.state_dim; ++i) x(i) = 2.0 * rs.normal();
        Vector p(spec.state_dim);
        for (int i = 0; i < spec.state_dim; ++i) p(i) = rs.normal();
        Matrix P(spec.state_dim, spec.noise_dim);
        for (int i = 0; i < P.size(); ++i) P(i) = rs.normal();
        const Vector& a =
            spec.action_grid[static_cast<std::size_t>(rs.uniform_int(spec.atom_count()))];

        auto value = [&](const Vector& xv) { return hamiltonian(spec, t, xv, a, p, P).value; };

        // First derivative against the assembled gradient.
        const Vector grad = hamiltonian_gradient(spec, t, x, a, p, P);
        const double h = spec.fd_step(x);
        Vector xs = x;
        for (int j = 0; j < spec.state_dim; ++j) {
            xs(j) = x(j) + h;
            const double fp = value(xs);
            xs(j) = x(j) - h;
            const double fm = value(xs);
            xs(j) = x(j);
            const double fd = (fp - fm) / (2.0 * h);
            worst = std::max(worst, std::abs(grad(j) - fd) / std::max(1.0, std::abs(fd)));
        }

        // Second derivative against the Hessian provider when analytic.
        if (spec.oracles.hamiltonian_xx) {
            const Matrix hess = spec.oracles.hamiltonian_xx(t, x, a, p, P);
            auto fd_spec = spec;
            fd_spec.oracles.hamiltonian_xx = nullptr;
            const Matrix fd = hamiltonian_hessian(fd_spec, t, x, a, p, P);
            worst = std::max(worst, (hess - fd).cwiseAbs().maxCoeff() /
                                        std::max(1.0, fd.cwiseAbs().maxCoeff()));
        }
    }
    return worst;
}

}  // namespace rclab
