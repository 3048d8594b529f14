#pragma once

#include <cmath>
#include <cstdint>
#include <mutex>
#include <utility>
#include <variant>
#include <vector>

#include "rclab/control.hpp"
#include "rclab/core.hpp"
#include "rclab/noise.hpp"
#include "rclab/parallel.hpp"
#include "rclab/problem.hpp"
#include "rclab/time_grid.hpp"

namespace rclab {

/// Record of the controls a trajectory ensemble was generated under, kept for
/// consistency checks in cost evaluation.
using ControlRecord = std::variant<std::monostate, StrictControl, RelaxedControl>;

/// Per-path, per-knot states of the controlled SDE on a grid, plus the
/// generating controls and the noise seed.
struct TrajectoryEnsemble {
    int paths = 0;
    int steps = 0;
    int state_dim = 0;
    std::uint64_t seed = 0;
    std::vector<double> data;  ///< paths x (steps+1) x n
    ControlRecord control;
    SingularControl singular;

    Eigen::Map<const Vector> state(int path, int knot) const {
        return Eigen::Map<const Vector>(
            data.data() + (static_cast<std::size_t>(path) * (steps + 1) + knot) * state_dim,
            state_dim);
    }

    Eigen::Map<Vector> state(int path, int knot) {
        return Eigen::Map<Vector>(
            data.data() + (static_cast<std::size_t>(path) * (steps + 1) + knot) * state_dim,
            state_dim);
    }
};

namespace detail {

/// One explicit Euler-Maruyama step; the singular increment is applied after
/// drift and diffusion within the step.
inline void euler_step(Vector& x, const Vector& drift, const Matrix& diffusion,
                       const Eigen::Ref<const Vector>& dw, const Matrix& gain,
                       const Vector& deta, double dt) {
    x += drift * dt;
    x += diffusion * dw;
    x += gain * deta;
}

template <typename CoefficientsAt>
TrajectoryEnsemble simulate_impl(const ProblemSpec& spec, const TimeGrid& grid,
                                 const SingularControl& eta, const NoiseEnsemble& noise,
                                 CoefficientsAt&& coeffs_at, ControlRecord record,
                                 int workers) {
    eta.validate(grid);
    if (noise.steps != grid.steps)
        throw InconsistentInputError("noise ensemble steps != grid steps");
    if (noise.dim != spec.noise_dim)
        throw InconsistentInputError("noise ensemble dimension != problem noise dimension");
    if (eta.dim() != spec.singular_dim)
        throw InconsistentInputError("singular control dimension != problem singular dimension");

    TrajectoryEnsemble traj;
    traj.paths = noise.paths;
    traj.steps = grid.steps;
    traj.state_dim = spec.state_dim;
    traj.seed = noise.seed;
    traj.control = std::move(record);
    traj.singular = eta;
    traj.data.resize(static_cast<std::size_t>(noise.paths) * (grid.steps + 1) * spec.state_dim);

    // Precompute the per-step singular pushes (deterministic across paths).
    std::vector<Vector> push(static_cast<std::size_t>(grid.steps));
    for (int i = 0; i < grid.steps; ++i)
        push[static_cast<std::size_t>(i)] = spec.singular_gain(grid.knot(i)) * eta.increment(i);

    std::vector<SimulationDivergedError> failures;
    std::mutex failures_mutex;
    parallel_for(0, noise.paths, workers, [&](int p) {
        Vector x = spec.initial_state;
        traj.state(p, 0) = x;
        for (int i = 0; i < grid.steps; ++i) {
            const double t = grid.knot(i);
            const double dt = grid.step_length(i);
            const auto [b, sig] = coeffs_at(i, t, x);
            x += b * dt;
            x += sig * noise.increment(p, i);
            x += push[static_cast<std::size_t>(i)];
            if (!x.allFinite()) {
                std::lock_guard<std::mutex> lock(failures_mutex);
                failures.emplace_back("simulation diverged at path " + std::to_string(p) +
                                          ", step " + std::to_string(i),
                                      p, i);
                return;
            }
            traj.state(p, i + 1) = x;
        }
    });
    if (!failures.empty()) throw failures.front();
    return traj;
}

}  // namespace detail

/// Simulate the strict SDE dx = b dt + sigma dW + G deta under (v, eta).
inline TrajectoryEnsemble simulate_strict(const ProblemSpec& spec, const TimeGrid& grid,
                                          const StrictControl& v, const SingularControl& eta,
                                          const NoiseEnsemble& noise, int workers = 0) {
    v.validate(grid, spec.atom_count());
    return detail::simulate_impl(
        spec, grid, eta, noise,
        [&](int i, double t, const Vector& x) {
            const Vector& a = spec.action_grid[static_cast<std::size_t>(v.atom_index(i, t, x))];
            return std::pair<Vector, Matrix>(spec.drift(t, x, a), spec.diffusion(t, x, a));
        },
        ControlRecord(v), workers);
}

/// Simulate the relaxed SDE with coefficient-averaged drift and diffusion.
/// Reusing the noise ensemble of a strict run gives coupled comparisons.
inline TrajectoryEnsemble simulate_relaxed(const ProblemSpec& spec, const TimeGrid& grid,
                                           const RelaxedControl& q, const SingularControl& eta,
                                           const NoiseEnsemble& noise, int workers = 0) {
    q.validate(grid, spec.atom_count());
    return detail::simulate_impl(
        spec, grid, eta, noise,
        [&](int i, double t, const Vector& x) {
            const Vector w = q.weight_row(i, t, x);
            return std::pair<Vector, Matrix>(relaxed_drift(spec, t, x, w),
                                             relaxed_diffusion(spec, t, x, w));
        },
        ControlRecord(q), workers);
}

/// Monte Carlo cost estimate: mean, standard error, path count.
struct CostEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    int paths = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline CostEstimate reduce_cost(const std::vector<double>& per_path, std::uint64_t seed) {
    CostEstimate est;
    est.paths = static_cast<int>(per_path.size());
    est.seed = seed;
    double sum = 0.0;
    for (double v : per_path) sum += v;
    est.mean = sum / est.paths;
    if (est.paths > 1) {
        double ss = 0.0;
        for (double v : per_path) ss += (v - est.mean) * (v - est.mean);
        est.stderr_ = std::sqrt(ss / (est.paths - 1) / est.paths);
    }
    return est;
}

inline double singular_cost_sum(const ProblemSpec& spec, const TimeGrid& grid,
                                const SingularControl& eta) {
    double sum = 0.0;
    for (int i = 0; i < grid.steps; ++i)
        sum += spec.singular_cost(grid.knot(i)).dot(eta.increment(i));
    return sum;
}

template <typename RunningAt>
CostEstimate cost_impl(const ProblemSpec& spec, const TimeGrid& grid,
                       const TrajectoryEnsemble& traj, const SingularControl& eta,
                       RunningAt&& running_at, int workers) {
    if (traj.steps != grid.steps)
        throw InconsistentInputError("trajectory steps != grid steps");
    const double singular_part = singular_cost_sum(spec, grid, eta);
    std::vector<double> per_path(static_cast<std::size_t>(traj.paths));
    parallel_for(0, traj.paths, workers, [&](int p) {
        double acc = 0.0;
        for (int i = 0; i < grid.steps; ++i) {
            const double t = grid.knot(i);
            acc += running_at(i, t, Vector(traj.state(p, i))) * grid.step_length(i);
        }
        acc += spec.terminal_cost(traj.state(p, grid.steps));
        per_path[static_cast<std::size_t>(p)] = acc + singular_part;
    });
    return reduce_cost(per_path, traj.seed);
}

inline void require_same_tables(const std::vector<int>& a, const std::vector<int>& b) {
    if (a != b)
        throw InconsistentInputError("control does not match the one the trajectories were generated under");
}

}  // namespace detail

/// Expected cost of a strict control: E[g(x_T) + sum h dt + sum l.deta].
inline CostEstimate cost(const ProblemSpec& spec, const TimeGrid& grid,
                         const TrajectoryEnsemble& traj, const StrictControl& v,
                         const SingularControl& eta, int workers = 0) {
    if (const auto* rec = std::get_if<StrictControl>(&traj.control);
        rec != nullptr && !rec->is_feedback() && !v.is_feedback())
        detail::require_same_tables(rec->table, v.table);
    else if (std::holds_alternative<RelaxedControl>(traj.control))
        throw InconsistentInputError("trajectories were generated under a relaxed control");
    return detail::cost_impl(
        spec, grid, traj, eta,
        [&](int i, double t, const Vector& x) {
            const Vector& a = spec.action_grid[static_cast<std::size_t>(v.atom_index(i, t, x))];
            return spec.running_cost(t, x, a);
        },
        workers);
}

/// Expected cost of a relaxed control, with h averaged against the weights.
inline CostEstimate cost(const ProblemSpec& spec, const TimeGrid& grid,
                         const TrajectoryEnsemble& traj, const RelaxedControl& q,
                         const SingularControl& eta, int workers = 0) {
    if (const auto* rec = std::get_if<RelaxedControl>(&traj.control);
        rec != nullptr && !rec->is_feedback() && !q.is_feedback()) {
        if (rec->weights.size() != q.weights.size())
            throw InconsistentInputError("control does not match the one the trajectories were generated under");
        for (std::size_t i = 0; i < q.weights.size(); ++i)
            if (rec->weights[i] != q.weights[i])
                throw InconsistentInputError("control does not match the one the trajectories were generated under");
    } else if (std::holds_alternative<StrictControl>(traj.control)) {
        throw InconsistentInputError("trajectories were generated under a strict control");
    }
    return detail::cost_impl(
        spec, grid, traj, eta,
        [&](int i, double t, const Vector& x) {
            return relaxed_running_cost(spec, t, x, q.weight_row(i, t, x));
        },
        workers);
}

}  // namespace rclab
