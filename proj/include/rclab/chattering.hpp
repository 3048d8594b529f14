#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "rclab/control.hpp"
#include "rclab/core.hpp"
#include "rclab/parallel.hpp"
#include "rclab/problem.hpp"
#include "rclab/rng.hpp"
#include "rclab/simulate.hpp"
#include "rclab/time_grid.hpp"

namespace rclab {

/// A strict approximation of a relaxed control: order n splits every base
/// step into n sub-steps whose atom occupation counts are the
/// largest-remainder rounding of n * w[i].
struct ChatteringSequenceElement {
    int order = 1;
    TimeGrid fine_grid;
    StrictControl control;              ///< table on fine_grid
    std::vector<Vector> source_weights; ///< the approximated open-loop rows
    bool degenerate = false;            ///< n < number of positive-weight atoms somewhere
};

namespace detail {

/// Largest-remainder (Hamilton) rounding of n*w into integer counts summing to n.
inline std::vector<int> largest_remainder_counts(const Vector& w, int n) {
    const int m = static_cast<int>(w.size());
    std::vector<int> counts(static_cast<std::size_t>(m));
    std::vector<double> remainder(static_cast<std::size_t>(m));
    int assigned = 0;
    for (int j = 0; j < m; ++j) {
        const double target = n * std::max(w(j), 0.0);
        counts[static_cast<std::size_t>(j)] = static_cast<int>(std::floor(target));
        remainder[static_cast<std::size_t>(j)] = target - std::floor(target);
        assigned += counts[static_cast<std::size_t>(j)];
    }
    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    // Ties go to the lower atom index for reproducibility.
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return remainder[static_cast<std::size_t>(a)] > remainder[static_cast<std::size_t>(b)];
    });
    for (int r = 0; assigned < n; ++r) {
        ++counts[static_cast<std::size_t>(order[static_cast<std::size_t>(r % m)])];
        ++assigned;
    }
    while (assigned > n) {  // possible only from weight rounding dust
        for (int j = m - 1; j >= 0 && assigned > n; --j)
            if (counts[static_cast<std::size_t>(j)] > 0) {
                --counts[static_cast<std::size_t>(j)];
                --assigned;
            }
    }
    return counts;
}

/// Sequence the count multiset over the n sub-steps so the running occupation
/// tracks the proportions (quota method): at each sub-step pick the atom with
/// the largest deficit against its target share. This keeps occupation exact
/// per base step and makes the oscillation period shrink like 1/n, which is
/// what drives the trajectory and cost gaps of the approximation to zero.
inline std::vector<int> quota_sequence(const std::vector<int>& counts, int n) {
    const int m = static_cast<int>(counts.size());
    std::vector<int> placed(static_cast<std::size_t>(m), 0);
    std::vector<int> seq(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        int best = -1;
        double best_deficit = -1.0;
        for (int j = 0; j < m; ++j) {
            if (placed[static_cast<std::size_t>(j)] >= counts[static_cast<std::size_t>(j)]) continue;
            const double deficit =
                static_cast<double>(counts[static_cast<std::size_t>(j)]) * (s + 1) / n -
                placed[static_cast<std::size_t>(j)];
            if (deficit > best_deficit + 1e-15) {
                best_deficit = deficit;
                best = j;
            }
        }
        seq[static_cast<std::size_t>(s)] = best;
        ++placed[static_cast<std::size_t>(best)];
    }
    return seq;
}

}  // namespace detail

/// Approximate an open-loop relaxed control by a strict control on the
/// n-fold refined grid. Occupation fractions reproduce the weights within
/// 1/n per base step; a feedback control must first be frozen into an
/// open-loop table along a reference trajectory.
inline ChatteringSequenceElement chatter(const RelaxedControl& q, int order,
                                         const TimeGrid& grid) {
    if (q.is_feedback())
        throw InvalidControlError("chatter: freeze a feedback control along a reference trajectory first");
    if (order < 1) throw InvalidInputError("chatter: order must be >= 1");
    if (static_cast<int>(q.weights.size()) != grid.steps)
        throw InvalidControlError("chatter: weight table length != grid steps");

    ChatteringSequenceElement elem;
    elem.order = order;
    elem.fine_grid = grid.refined(order);
    elem.source_weights = q.weights;
    elem.control.table.reserve(static_cast<std::size_t>(grid.steps) * order);
    for (const Vector& row : q.weights) {
        const int positive = static_cast<int>((row.array() > 0.0).count());
        if (order < positive) elem.degenerate = true;
        const auto counts = detail::largest_remainder_counts(row, order);
        const auto seq = detail::quota_sequence(counts, order);
        elem.control.table.insert(elem.control.table.end(), seq.begin(), seq.end());
    }
    return elem;
}

/// Evaluate the weights of a feedback control along one reference path,
/// producing the open-loop table chatter() needs.
inline RelaxedControl freeze_feedback(const RelaxedControl& q, const TimeGrid& grid,
                                      const TrajectoryEnsemble& reference, int path) {
    if (!q.is_feedback()) return q;
    RelaxedControl frozen;
    frozen.weights.reserve(static_cast<std::size_t>(grid.steps));
    for (int i = 0; i < grid.steps; ++i)
        frozen.weights.push_back(q.feedback(grid.knot(i), reference.state(path, i)));
    return frozen;
}

/// Bounded test function f(t, a) for the weak-convergence surrogate.
using TestFunction = std::function<double(double, const Vector&)>;

/// Default family: polynomials in t up to degree 3 tensored with smoothed
/// bumps centered at each atom.
inline std::vector<TestFunction> default_test_family(const ProblemSpec& spec) {
    std::vector<TestFunction> family;
    double min_dist = 1.0;
    for (std::size_t i = 0; i < spec.action_grid.size(); ++i)
        for (std::size_t j = i + 1; j < spec.action_grid.size(); ++j)
            min_dist = std::min(min_dist, (spec.action_grid[i] - spec.action_grid[j]).norm());
    const double width = 0.5 * min_dist;
    const double horizon = spec.horizon;
    for (int deg = 0; deg <= 3; ++deg) {
        for (const Vector& atom : spec.action_grid) {
            family.push_back([deg, atom, width, horizon](double t, const Vector& a) {
                const double s = t / horizon;
                return std::pow(s, deg) * std::exp(-(a - atom).squaredNorm() / (2.0 * width * width));
            });
        }
    }
    return family;
}

/// Integer sub-step occupation counts per (base step, atom); each row sums
/// to the order exactly.
inline std::vector<std::vector<int>> occupation_counts(const ChatteringSequenceElement& elem,
                                                       int atom_count) {
    const int base_steps = static_cast<int>(elem.source_weights.size());
    const int n = elem.order;
    std::vector<std::vector<int>> counts(
        static_cast<std::size_t>(base_steps),
        std::vector<int>(static_cast<std::size_t>(atom_count), 0));
    for (int i = 0; i < base_steps; ++i)
        for (int s = 0; s < n; ++s)
            ++counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(
                elem.control.table[static_cast<std::size_t>(i) * n + s])];
    return counts;
}

/// Occupation fractions of the chattered control per (base step, atom).
inline std::vector<Vector> occupation_fractions(const ChatteringSequenceElement& elem,
                                                int atom_count) {
    const auto counts = occupation_counts(elem, atom_count);
    std::vector<Vector> occ(counts.size(), Vector::Zero(atom_count));
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (int j = 0; j < atom_count; ++j)
            occ[i](j) = static_cast<double>(counts[i][static_cast<std::size_t>(j)]) / elem.order;
    return occ;
}

/// Weak-convergence gap of the chattering against its source measure:
/// max over the family of |sum_i sum_j f(t_i, a_j) (occupation - w)[i][j] dt|.
inline double weak_gap(const RelaxedControl& q, const ChatteringSequenceElement& elem,
                       const TimeGrid& grid, const ProblemSpec& spec,
                       const std::vector<TestFunction>& family) {
    if (family.empty()) throw InvalidInputError("weak_gap: empty test family");
    if (q.is_feedback() || static_cast<int>(q.weights.size()) != grid.steps)
        throw InvalidControlError("weak_gap: open-loop control on the base grid required");
    const auto occ = occupation_fractions(elem, spec.atom_count());
    double gap = 0.0;
    for (const auto& f : family) {
        double acc = 0.0;
        for (int i = 0; i < grid.steps; ++i) {
            const double t = grid.knot(i);
            const double dt = grid.step_length(i);
            const Vector& w = q.weights[static_cast<std::size_t>(i)];
            for (int j = 0; j < spec.atom_count(); ++j) {
                const double delta = occ[static_cast<std::size_t>(i)](j) - w(j);
                if (delta != 0.0)
                    acc += f(t, spec.action_grid[static_cast<std::size_t>(j)]) * delta * dt;
            }
        }
        gap = std::max(gap, std::abs(acc));
    }
    return gap;
}

inline double weak_gap(const RelaxedControl& q, const ChatteringSequenceElement& elem,
                       const TimeGrid& grid, const ProblemSpec& spec) {
    return weak_gap(q, elem, grid, spec, default_test_family(spec));
}

/// Monte Carlo gaps between a chattered strict control and its source relaxed
/// control, coupled through shared noise.
struct GapReport {
    int order = 0;
    double weak = 0.0;
    double trajectory = 0.0;        ///< E[sup_t |x^n - x^q|^2]
    double trajectory_stderr = 0.0;
    double cost = 0.0;              ///< |J(v^n, eta) - J(q, eta)|
    double cost_stderr = 0.0;
};

/// Trajectory and cost stability of the chattering approximation (one report
/// per order). All orders share one Brownian path through a master grid of
/// lcm(orders) sub-steps per base step; within an order, the strict and
/// relaxed trajectories use identical increments and the identical eta.
inline std::vector<GapReport> stability_report(const ProblemSpec& spec, const TimeGrid& grid,
                                               const RelaxedControl& q, const SingularControl& eta,
                                               const std::vector<int>& orders, int paths,
                                               std::uint64_t seed, int workers = 0) {
    if (orders.empty()) throw InvalidInputError("stability_report: no orders given");
    if (paths < 1) throw InvalidInputError("stability_report: paths must be positive");
    q.validate(grid, spec.atom_count());
    eta.validate(grid);

    int master = 1;
    for (int n : orders) {
        if (n < 1) throw InvalidInputError("stability_report: orders must be >= 1");
        master = std::lcm(master, n);
    }

    std::vector<GapReport> reports;
    reports.reserve(orders.size());
    for (int n : orders) {
        const int agg = master / n;
        const TimeGrid fine = grid.refined(n);
        const ChatteringSequenceElement elem = chatter(q, n, grid);
        const RelaxedControl q_fine = q.refined(n);
        const SingularControl eta_fine = eta.refined(n);
        const double master_dt = grid.dt() / master;
        const double scale = std::sqrt(master_dt);

        std::vector<Vector> push(static_cast<std::size_t>(fine.steps));
        for (int s = 0; s < fine.steps; ++s)
            push[static_cast<std::size_t>(s)] =
                spec.singular_gain(fine.knot(s)) * eta_fine.increment(s);
        const double singular_part = detail::singular_cost_sum(spec, fine, eta_fine);

        std::vector<double> sup2(static_cast<std::size_t>(paths));
        std::vector<double> cost_diff(static_cast<std::size_t>(paths));
        parallel_for(0, paths, workers, [&](int p) {
            Vector x_n = spec.initial_state;
            Vector x_q = spec.initial_state;
            Vector dw(spec.noise_dim);
            double worst = 0.0;
            double cost_n = 0.0;
            double cost_q = 0.0;
            for (int s = 0; s < fine.steps; ++s) {
                const double t = fine.knot(s);
                const double dt = fine.step_length(s);
                for (int c = 0; c < spec.noise_dim; ++c) {
                    double sum = 0.0;
                    for (int u = 0; u < agg; ++u)
                        sum += rng::path_normal(seed, static_cast<std::uint64_t>(p),
                                                static_cast<std::uint64_t>(s) * agg + u,
                                                static_cast<std::uint64_t>(c));
                    dw(c) = scale * sum;
                }
                const Vector& atom =
                    spec.action_grid[static_cast<std::size_t>(elem.control.table[static_cast<std::size_t>(s)])];
                const Vector& w = q_fine.weights[static_cast<std::size_t>(s)];
                cost_n += spec.running_cost(t, x_n, atom) * dt;
                cost_q += relaxed_running_cost(spec, t, x_q, w) * dt;
                const Vector b_n = spec.drift(t, x_n, atom);
                const Matrix sig_n = spec.diffusion(t, x_n, atom);
                const Vector b_q = relaxed_drift(spec, t, x_q, w);
                const Matrix sig_q = relaxed_diffusion(spec, t, x_q, w);
                x_n += b_n * dt;
                x_n += sig_n * dw;
                x_n += push[static_cast<std::size_t>(s)];
                x_q += b_q * dt;
                x_q += sig_q * dw;
                x_q += push[static_cast<std::size_t>(s)];
                worst = std::max(worst, (x_n - x_q).squaredNorm());
            }
            cost_n += spec.terminal_cost(x_n) + singular_part;
            cost_q += spec.terminal_cost(x_q) + singular_part;
            sup2[static_cast<std::size_t>(p)] = worst;
            cost_diff[static_cast<std::size_t>(p)] = cost_n - cost_q;
        });

        GapReport rep;
        rep.order = n;
        rep.weak = weak_gap(q, elem, grid, spec);
        const CostEstimate traj_est = detail::reduce_cost(sup2, seed);
        rep.trajectory = traj_est.mean;
        rep.trajectory_stderr = traj_est.stderr_;
        const CostEstimate cost_est = detail::reduce_cost(cost_diff, seed);
        rep.cost = std::abs(cost_est.mean);
        rep.cost_stderr = cost_est.stderr_;
        reports.push_back(rep);
    }
    return reports;
}

}  // namespace rclab
