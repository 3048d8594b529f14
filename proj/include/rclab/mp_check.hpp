#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rclab/adjoint.hpp"
#include "rclab/chattering.hpp"
#include "rclab/control.hpp"
#include "rclab/core.hpp"
#include "rclab/hamiltonian.hpp"
#include "rclab/problem.hpp"
#include "rclab/rng.hpp"
#include "rclab/simulate.hpp"
#include "rclab/time_grid.hpp"

namespace rclab {

/// Result of checking the Hamiltonian minimum condition at a candidate
/// measure: per-knot worst violation of
///   generalized H at the candidate <= min over atoms,
/// plus the fraction of (path, knot) pairs violating beyond tolerance.
struct HamiltonianMinSection {
    double worst_violation = 0.0;
    double violation_fraction = 0.0;
    std::vector<double> per_knot_worst;  ///< worst violation across paths per knot
    std::vector<double> per_knot_mean;
    double simplex_cross_check = 0.0;  ///< best improvement a random simplex point found
    double tolerance = 0.0;
    bool passed = true;
};

/// Since the generalized Hamiltonian is affine in the measure, the infimum
/// over the simplex is attained at an atom; the check records
/// max(0, H(mu) - min_j H(delta_j)) per (path, knot) and cross-checks the
/// atom minimum against random simplex samples.
inline HamiltonianMinSection check_hamiltonian_min(
    const ProblemSpec& spec, const TimeGrid& grid, const TrajectoryEnsemble& traj,
    const RelaxedControl& mu, const FirstOrderAdjoint& first, const SecondOrderAdjoint& second,
    double tol, int simplex_samples = 100, std::uint64_t seed = 77) {
    if (traj.steps != grid.steps || first.steps != grid.steps || second.steps != grid.steps ||
        first.paths != traj.paths || second.paths != traj.paths)
        throw InconsistentInputError("check_hamiltonian_min: input sizes do not match");

    HamiltonianMinSection section;
    section.tolerance = tol;
    section.per_knot_worst.assign(static_cast<std::size_t>(grid.steps), 0.0);
    section.per_knot_mean.assign(static_cast<std::size_t>(grid.steps), 0.0);

    RandomStream rs(seed);
    const int m = spec.atom_count();
    std::vector<Vector> simplex;
    simplex.reserve(static_cast<std::size_t>(simplex_samples));
    for (int s = 0; s < simplex_samples; ++s) {
        Vector w(m);
        for (int j = 0; j < m; ++j) w(j) = -std::log(std::max(rs.uniform(), 1e-300));
        w /= w.sum();
        simplex.push_back(w);
    }

    long total = 0;
    long violating = 0;
    for (int i = 0; i < grid.steps; ++i) {
        const double t = grid.knot(i);
        double knot_worst = 0.0;
        double knot_sum = 0.0;
        for (int p = 0; p < traj.paths; ++p) {
            const Vector x = traj.state(p, i);
            const Vector w_mu = mu.weight_row(i, t, x);
            const Vector p_adj = first.p(p, i);
            const Matrix P_adj = first.P(p, i);
            const Matrix k_adj = second.k(p, i);
            const Matrix shifted = P_adj - k_adj * relaxed_diffusion(spec, t, x, w_mu);

            double mu_value = 0.0;
            double atom_min = std::numeric_limits<double>::infinity();
            std::vector<double> atom_values(static_cast<std::size_t>(m));
            for (int j = 0; j < m; ++j) {
                const double v = generalized_hamiltonian_atom(spec, t, x, j, p_adj, shifted, k_adj);
                atom_values[static_cast<std::size_t>(j)] = v;
                atom_min = std::min(atom_min, v);
                if (w_mu(j) != 0.0) mu_value += w_mu(j) * v;
            }
            const double violation = std::max(0.0, mu_value - atom_min);
            knot_worst = std::max(knot_worst, violation);
            knot_sum += violation;
            ++total;
            if (violation > tol) ++violating;

            // Random simplex points must not beat the atom minimum.
            for (const Vector& w : simplex) {
                double v = 0.0;
                for (int j = 0; j < m; ++j) v += w(j) * atom_values[static_cast<std::size_t>(j)];
                section.simplex_cross_check =
                    std::max(section.simplex_cross_check, atom_min - v);
            }
        }
        section.per_knot_worst[static_cast<std::size_t>(i)] = knot_worst;
        section.per_knot_mean[static_cast<std::size_t>(i)] = knot_sum / traj.paths;
        section.worst_violation = std::max(section.worst_violation, knot_worst);
    }
    section.violation_fraction = total == 0 ? 0.0 : static_cast<double>(violating) / total;
    section.passed = section.violation_fraction == 0.0;
    return section;
}

/// One candidate's verdict for the integral singular condition
/// E int (l + G* p) d(eta - xi) >= 0.
struct SingularIntegralCandidate {
    double integral = 0.0;
    double stderr_ = 0.0;
    bool passed = true;
};

struct SingularIntegralSection {
    std::vector<SingularIntegralCandidate> candidates;
    double worst = 0.0;  ///< most negative integral (minus its slack)
    bool passed = true;
};

/// Monte Carlo check of the integral form against a set of admissible
/// comparison processes; passes when every integral is above
/// -tol - 2 stderr - slack.
inline SingularIntegralSection check_singular_integral(
    const ProblemSpec& spec, const TimeGrid& grid, const FirstOrderAdjoint& first,
    const SingularControl& xi, const std::vector<SingularControl>& candidates, double tol,
    double slack = 0.0) {
    if (first.steps != grid.steps)
        throw InconsistentInputError("check_singular_integral: grid mismatch");
    xi.validate(grid);

    SingularIntegralSection section;
    for (const SingularControl& eta : candidates) {
        eta.validate(grid);
        std::vector<double> per_path(static_cast<std::size_t>(first.paths));
        for (int p = 0; p < first.paths; ++p) {
            double acc = 0.0;
            for (int i = 0; i < grid.steps; ++i) {
                const double t = grid.knot(i);
                const Vector weight =
                    spec.singular_cost(t) + spec.singular_gain(t).transpose() * Vector(first.p(p, i));
                acc += weight.dot(eta.increment(i) - xi.increment(i));
            }
            per_path[static_cast<std::size_t>(p)] = acc;
        }
        const CostEstimate est = detail::reduce_cost(per_path, 0);
        SingularIntegralCandidate cand;
        cand.integral = est.mean;
        cand.stderr_ = est.stderr_;
        cand.passed = est.mean >= -(tol + 2.0 * est.stderr_ + slack);
        section.worst = std::min(section.worst, cand.integral);
        section.passed = section.passed && cand.passed;
        section.candidates.push_back(cand);
    }
    return section;
}

/// Pointwise singular conditions: l + G*p >= 0 everywhere (condition A) and
/// xi charges only the zero set of l + G*p (condition B, complementary
/// slackness; the indicator uses "> tol").
struct SingularGlobalSection {
    double min_slack = 0.0;           ///< min over (path, knot, component) of l_i + G_i* p
    double violating_fraction = 0.0;  ///< fraction with slack < -tol
    double complementary_mass = 0.0;  ///< max over paths of sum 1{slack > tol} dxi
    bool nonnegativity_passed = true;
    bool complementarity_passed = true;
    std::vector<double> per_knot_min_slack;
};

inline SingularGlobalSection check_singular_global(const ProblemSpec& spec, const TimeGrid& grid,
                                                   const FirstOrderAdjoint& first,
                                                   const SingularControl& xi, double tol) {
    if (first.steps != grid.steps)
        throw InconsistentInputError("check_singular_global: grid mismatch");
    xi.validate(grid);

    SingularGlobalSection section;
    section.min_slack = std::numeric_limits<double>::infinity();
    section.per_knot_min_slack.assign(static_cast<std::size_t>(grid.steps),
                                      std::numeric_limits<double>::infinity());
    long total = 0;
    long violating = 0;
    for (int p = 0; p < first.paths; ++p) {
        double mass = 0.0;
        for (int i = 0; i < grid.steps; ++i) {
            const double t = grid.knot(i);
            const Vector slack =
                spec.singular_cost(t) + spec.singular_gain(t).transpose() * Vector(first.p(p, i));
            const Vector dxi = xi.increment(i);
            for (int c = 0; c < spec.singular_dim; ++c) {
                section.min_slack = std::min(section.min_slack, slack(c));
                section.per_knot_min_slack[static_cast<std::size_t>(i)] =
                    std::min(section.per_knot_min_slack[static_cast<std::size_t>(i)], slack(c));
                ++total;
                if (slack(c) < -tol) ++violating;
                if (slack(c) > tol) mass += dxi(c);
            }
        }
        section.complementary_mass = std::max(section.complementary_mass, mass);
    }
    section.violating_fraction = total == 0 ? 0.0 : static_cast<double>(violating) / total;
    section.nonnegativity_passed = section.violating_fraction == 0.0;
    section.complementarity_passed = section.complementary_mass <= tol;
    return section;
}

/// d1: product-measure size of the disagreement set of two strict controls.
/// Open-loop controls are deterministic, so the probability average drops out.
inline double ekeland_d1(const StrictControl& u, const StrictControl& v, const TimeGrid& grid) {
    if (u.is_feedback() || v.is_feedback())
        throw InvalidInputError("ekeland_d1: use the trajectory overload for feedback controls");
    if (static_cast<int>(u.table.size()) != grid.steps ||
        static_cast<int>(v.table.size()) != grid.steps)
        throw InconsistentInputError("ekeland_d1: control tables do not match the grid");
    double measure = 0.0;
    for (int i = 0; i < grid.steps; ++i)
        if (u.table[static_cast<std::size_t>(i)] != v.table[static_cast<std::size_t>(i)])
            measure += grid.step_length(i);
    return measure;
}

/// Feedback variant: empirical disagreement measure along an ensemble.
inline double ekeland_d1(const StrictControl& u, const StrictControl& v, const TimeGrid& grid,
                         const TrajectoryEnsemble& traj) {
    if (traj.steps != grid.steps)
        throw InconsistentInputError("ekeland_d1: trajectory grid mismatch");
    double measure = 0.0;
    for (int p = 0; p < traj.paths; ++p)
        for (int i = 0; i < grid.steps; ++i) {
            const double t = grid.knot(i);
            const Vector x = traj.state(p, i);
            if (u.atom_index(i, t, x) != v.atom_index(i, t, x)) measure += grid.step_length(i);
        }
    return measure / traj.paths;
}

/// d2: (E int_0^T sup_s |xi_s - eta_s|^2 dt)^(1/2); for deterministic tables
/// this is sqrt(T) times the sup-norm distance of the cumulative processes.
inline double ekeland_d2(const SingularControl& xi, const SingularControl& eta,
                         const TimeGrid& grid) {
    if (static_cast<int>(xi.cumulative.size()) != grid.steps + 1 ||
        static_cast<int>(eta.cumulative.size()) != grid.steps + 1)
        throw InconsistentInputError("ekeland_d2: control tables do not match the grid");
    double sup = 0.0;
    for (int i = 0; i <= grid.steps; ++i)
        sup = std::max(sup, (xi.cumulative[static_cast<std::size_t>(i)] -
                             eta.cumulative[static_cast<std::size_t>(i)])
                                .norm());
    return std::sqrt(grid.horizon) * sup;
}

/// Spike variation or convex singular perturbation.
struct PerturbationSpec {
    enum class Kind { Spike, ConvexSingular };
    Kind kind = Kind::Spike;
    // Spike: replace the control by atom `replacement` on [tau, tau + theta].
    double tau = 0.0;
    double theta = 0.0;
    int replacement = 0;
    // Convex singular: move toward `target` with weight theta in [0, 1].
    SingularControl target;
};

struct PerturbedControls {
    StrictControl control;
    SingularControl singular;
    bool snapped = false;  ///< spike window was snapped to grid knots
};

/// Apply a perturbation. The spike window is snapped to whole steps, with the
/// number of replaced steps rounded down so that d1(u, perturbed) <= theta
/// always holds; the convex combination of nondecreasing processes stays
/// admissible for every theta in [0, 1].
inline PerturbedControls perturb(const StrictControl& u, const SingularControl& xi,
                                 const PerturbationSpec& pert, const TimeGrid& grid) {
    PerturbedControls out{u, xi, false};
    if (pert.kind == PerturbationSpec::Kind::Spike) {
        if (u.is_feedback())
            throw InvalidControlError("perturb: spike requires an open-loop control");
        if (pert.theta < 0.0 || pert.tau < 0.0 || pert.tau + pert.theta > grid.horizon + 1e-12)
            throw InvalidInputError("perturb: spike window outside [0, T]");
        const double dt = grid.dt();
        const double start_exact = pert.tau / dt;
        int start = static_cast<int>(std::llround(start_exact));
        start = std::clamp(start, 0, grid.steps);
        const int span = static_cast<int>(std::floor(pert.theta / dt * (1.0 + 1e-12)));
        const int stop = std::min(grid.steps, start + span);
        out.snapped = std::abs(start_exact - start) > 1e-9 ||
                      std::abs(pert.theta / dt - span) > 1e-9;
        for (int i = start; i < stop; ++i)
            out.control.table[static_cast<std::size_t>(i)] = pert.replacement;
        return out;
    }
    if (pert.theta < 0.0 || pert.theta > 1.0)
        throw InvalidInputError("perturb: convex weight must lie in [0, 1]");
    if (pert.target.cumulative.size() != xi.cumulative.size())
        throw InconsistentInputError("perturb: singular targets live on different grids");
    for (std::size_t i = 0; i < xi.cumulative.size(); ++i)
        out.singular.cumulative[i] =
            xi.cumulative[i] + pert.theta * (pert.target.cumulative[i] - xi.cumulative[i]);
    return out;
}

/// One perturbation sample in a near-optimality sweep.
struct NearOptimalitySample {
    PerturbationSpec::Kind kind = PerturbationSpec::Kind::Spike;
    double theta = 0.0;
    double cost_delta = 0.0;  ///< J(perturbed) - J(u^n, xi)
    double stderr_ = 0.0;
    double slack = 0.0;       ///< cost_delta + eps_n * C * theta
};

struct NearOptimalityReport {
    std::vector<NearOptimalitySample> samples;
    double worst_slack = std::numeric_limits<double>::infinity();
    int violations = 0;
    bool passed = true;
};

/// Verify J(perturbed) - J(u^n, xi) + eps_n * C * theta >= -tol - 2 stderr
/// over a seeded sweep of spike and convex-singular perturbations, all
/// simulated under coupled noise.
inline NearOptimalityReport check_near_optimality(const ProblemSpec& spec, const TimeGrid& grid,
                                                  const StrictControl& u, const SingularControl& xi,
                                                  double eps_n, int samples, double constant_c,
                                                  double tol, int paths, std::uint64_t seed,
                                                  int workers = 0) {
    NearOptimalityReport report;
    const NoiseEnsemble noise =
        NoiseEnsemble::generate(seed, paths, grid.steps, spec.noise_dim, grid.dt(), 1, workers);
    const TrajectoryEnsemble base_traj = simulate_strict(spec, grid, u, xi, noise, workers);
    const CostEstimate base_cost = cost(spec, grid, base_traj, u, xi, workers);

    RandomStream rs(seed ^ 0xABCDEF);
    for (int s = 0; s < samples; ++s) {
        PerturbationSpec pert;
        if (s % 2 == 0) {
            pert.kind = PerturbationSpec::Kind::Spike;
            pert.theta = rs.uniform(grid.dt(), 0.5 * grid.horizon);
            pert.tau = rs.uniform(0.0, grid.horizon - pert.theta);
            pert.replacement = rs.uniform_int(spec.atom_count());
        } else {
            pert.kind = PerturbationSpec::Kind::ConvexSingular;
            pert.theta = rs.uniform();
            // Random admissible comparison process: nonnegative jumps.
            pert.target = SingularControl::zero(grid, spec.singular_dim);
            Vector level = Vector::Zero(spec.singular_dim);
            for (int i = 1; i <= grid.steps; ++i) {
                for (int c = 0; c < spec.singular_dim; ++c)
                    if (rs.uniform() < 3.0 / grid.steps) level(c) += std::abs(rs.normal());
                pert.target.cumulative[static_cast<std::size_t>(i)] = level;
            }
        }
        const PerturbedControls pc = perturb(u, xi, pert, grid);
        const TrajectoryEnsemble traj =
            simulate_strict(spec, grid, pc.control, pc.singular, noise, workers);
        const CostEstimate pert_cost = cost(spec, grid, traj, pc.control, pc.singular, workers);

        NearOptimalitySample sample;
        sample.kind = pert.kind;
        sample.theta = pert.theta;
        sample.cost_delta = pert_cost.mean - base_cost.mean;
        sample.stderr_ = std::hypot(pert_cost.stderr_, base_cost.stderr_);
        sample.slack = sample.cost_delta + eps_n * constant_c * pert.theta;
        if (sample.slack < -(tol + 2.0 * sample.stderr_)) ++report.violations;
        report.worst_slack = std::min(report.worst_slack, sample.slack);
        report.samples.push_back(sample);
    }
    report.passed = report.violations == 0;
    return report;
}

/// Near maximum principle at a strict control: the pointwise generalized
/// Hamiltonian inequality with C*eps_n slack, plus the integral singular
/// condition with the same slack.
struct NearMPReport {
    double worst_violation = 0.0;
    double violation_fraction = 0.0;
    SingularIntegralSection singular;
    bool passed = true;
};

inline NearMPReport check_near_mp(const ProblemSpec& spec, const TimeGrid& grid,
                                  const TrajectoryEnsemble& traj, const StrictControl& u,
                                  const FirstOrderAdjoint& first, const SecondOrderAdjoint& second,
                                  const SingularControl& xi,
                                  const std::vector<SingularControl>& eta_candidates, double eps_n,
                                  double constant_c, double tol) {
    if (traj.steps != grid.steps || first.steps != grid.steps || second.steps != grid.steps)
        throw InconsistentInputError("check_near_mp: grid mismatch");

    NearMPReport report;
    const double budget = constant_c * eps_n + tol;
    long total = 0;
    long violating = 0;
    for (int i = 0; i < grid.steps; ++i) {
        const double t = grid.knot(i);
        for (int p = 0; p < traj.paths; ++p) {
            const Vector x = traj.state(p, i);
            const int atom = u.atom_index(i, t, x);
            const Vector p_adj = first.p(p, i);
            const Matrix k_adj = second.k(p, i);
            const Matrix shifted =
                Matrix(first.P(p, i)) -
                k_adj * spec.diffusion(t, x, spec.action_grid[static_cast<std::size_t>(atom)]);
            const double lhs =
                generalized_hamiltonian_atom(spec, t, x, atom, p_adj, shifted, k_adj);
            double rhs = std::numeric_limits<double>::infinity();
            for (int j = 0; j < spec.atom_count(); ++j)
                rhs = std::min(rhs,
                               generalized_hamiltonian_atom(spec, t, x, j, p_adj, shifted, k_adj));
            report.worst_violation = std::max(report.worst_violation, std::max(0.0, lhs - rhs));
            ++total;
            if (lhs - rhs > budget) ++violating;
        }
    }
    report.violation_fraction = total == 0 ? 0.0 : static_cast<double>(violating) / total;
    report.singular =
        check_singular_integral(spec, grid, first, xi, eta_candidates, tol, constant_c * eps_n);
    report.passed = report.violation_fraction == 0.0 && report.singular.passed;
    return report;
}

}  // namespace rclab
