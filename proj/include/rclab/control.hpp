#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "rclab/core.hpp"
#include "rclab/problem.hpp"
#include "rclab/time_grid.hpp"

namespace rclab {

/// Point-valued control: one atom index per step (open-loop table) or a
/// feedback rule (t, x) -> atom index.
struct StrictControl {
    std::vector<int> table;
    std::function<int(double, const Vector&)> feedback;

    bool is_feedback() const { return static_cast<bool>(feedback); }

    int atom_index(int step, double t, const Vector& x) const {
        return is_feedback() ? feedback(t, x) : table[static_cast<std::size_t>(step)];
    }

    static StrictControl constant(int atom, const TimeGrid& grid) {
        StrictControl v;
        v.table.assign(static_cast<std::size_t>(grid.steps), atom);
        return v;
    }

    void validate(const TimeGrid& grid, int atom_count) const {
        if (is_feedback()) return;
        if (static_cast<int>(table.size()) != grid.steps)
            throw InvalidControlError("strict control table length != grid steps");
        for (int idx : table)
            if (idx < 0 || idx >= atom_count)
                throw InvalidControlError("strict control atom index out of range");
    }
};

/// Check a weight row against the simplex within `tol`; throws on violation.
inline void check_simplex_row(const Vector& w, double tol = 1e-9) {
    if ((w.array() < -tol).any())
        throw InvalidMeasureError("weight row has negative entry beyond tolerance");
    const double sum = w.sum();
    if (std::abs(sum - 1.0) > tol)
        throw InvalidMeasureError("weight row sums to " + std::to_string(sum) + ", not 1");
}

/// Measure-valued control: per-step probability weights over the action grid
/// (open-loop) or a feedback rule (t, x) -> weight row.
struct RelaxedControl {
    std::vector<Vector> weights;
    std::function<Vector(double, const Vector&)> feedback;

    bool is_feedback() const { return static_cast<bool>(feedback); }

    Vector weight_row(int step, double t, const Vector& x) const {
        return is_feedback() ? feedback(t, x) : weights[static_cast<std::size_t>(step)];
    }

    /// Open-loop control with the same weight row at every step.
    static RelaxedControl constant(Vector row, const TimeGrid& grid) {
        RelaxedControl q;
        q.weights.assign(static_cast<std::size_t>(grid.steps), std::move(row));
        return q;
    }

    /// Each base row repeated `factor` times, for use on grid.refined(factor).
    RelaxedControl refined(int factor) const {
        if (is_feedback()) return *this;
        RelaxedControl q;
        q.weights.reserve(weights.size() * static_cast<std::size_t>(factor));
        for (const Vector& row : weights)
            for (int s = 0; s < factor; ++s) q.weights.push_back(row);
        return q;
    }

    void validate(const TimeGrid& grid, int atom_count, double tol = 1e-12) const {
        if (is_feedback()) return;
        if (static_cast<int>(weights.size()) != grid.steps)
            throw InvalidControlError("relaxed control table length != grid steps");
        for (const Vector& row : weights) {
            if (row.size() != atom_count)
                throw InvalidControlError("weight row length != atom count");
            check_simplex_row(row, tol);
        }
    }
};

/// Componentwise nondecreasing jump process eta on the grid knots,
/// left-continuous convention: cumulative[i] excludes the jump charged at
/// knot i, and the jump at knot i (including t=0) acts within step i.
struct SingularControl {
    std::vector<Vector> cumulative;  ///< per knot, steps+1 entries in [0,inf)^m

    static SingularControl zero(const TimeGrid& grid, int singular_dim) {
        SingularControl eta;
        eta.cumulative.assign(static_cast<std::size_t>(grid.steps + 1),
                              Vector::Zero(singular_dim));
        return eta;
    }

    /// Single jump of size `jump` charged at knot `knot`.
    static SingularControl single_jump(const TimeGrid& grid, const Vector& jump, int knot) {
        SingularControl eta = zero(grid, static_cast<int>(jump.size()));
        for (int i = knot + 1; i <= grid.steps; ++i)
            eta.cumulative[static_cast<std::size_t>(i)] = jump;
        return eta;
    }

    int dim() const { return cumulative.empty() ? 0 : static_cast<int>(cumulative.front().size()); }

    Vector increment(int step) const {
        return cumulative[static_cast<std::size_t>(step + 1)] -
               cumulative[static_cast<std::size_t>(step)];
    }

    Vector total() const { return cumulative.back(); }

    /// Same jumps placed at the corresponding knots of grid.refined(factor).
    SingularControl refined(int factor) const {
        SingularControl eta;
        const int steps = static_cast<int>(cumulative.size()) - 1;
        eta.cumulative.reserve(static_cast<std::size_t>(steps * factor + 1));
        for (int i = 0; i < steps; ++i) {
            // The base jump dη[i] lands in the first sub-step; the cumulative
            // value is flat across the remaining sub-knots.
            eta.cumulative.push_back(cumulative[static_cast<std::size_t>(i)]);
            for (int s = 1; s < factor; ++s)
                eta.cumulative.push_back(cumulative[static_cast<std::size_t>(i + 1)]);
        }
        eta.cumulative.push_back(cumulative.back());
        return eta;
    }

    void validate(const TimeGrid& grid) const {
        if (static_cast<int>(cumulative.size()) != grid.steps + 1)
            throw InvalidControlError("singular control table length != grid knots");
        if (cumulative.front().cwiseAbs().maxCoeff() != 0.0)
            throw InvalidControlError("singular control must start at 0");
        for (std::size_t i = 0; i + 1 < cumulative.size(); ++i)
            if (((cumulative[i + 1] - cumulative[i]).array() < 0.0).any())
                throw InvalidControlError("singular control must be componentwise nondecreasing");
    }
};

/// Embed a strict control as the Dirac measure delta_{v_t}: mass 1 on the
/// selected atom at every step.
inline RelaxedControl dirac_embed(const StrictControl& v, int atom_count) {
    RelaxedControl q;
    if (v.is_feedback()) {
        auto fb = v.feedback;
        q.feedback = [fb, atom_count](double t, const Vector& x) {
            const int idx = fb(t, x);
            if (idx < 0 || idx >= atom_count)
                throw InvalidControlError("dirac_embed: atom index out of range");
            Vector row = Vector::Zero(atom_count);
            row(idx) = 1.0;
            return row;
        };
        return q;
    }
    q.weights.reserve(v.table.size());
    for (int idx : v.table) {
        if (idx < 0 || idx >= atom_count)
            throw InvalidControlError("dirac_embed: atom index out of range");
        Vector row = Vector::Zero(atom_count);
        row(idx) = 1.0;
        q.weights.push_back(std::move(row));
    }
    return q;
}

/// Recover the strict control carrying the most mass at each step.
inline StrictControl argmax_atoms(const RelaxedControl& q) {
    StrictControl v;
    v.table.reserve(q.weights.size());
    for (const Vector& row : q.weights) {
        int best = 0;
        row.maxCoeff(&best);
        v.table.push_back(best);
    }
    return v;
}

/// Integral of the drift against a discrete measure: sum_j w_j b(t, x, a_j).
inline Vector relaxed_drift(const ProblemSpec& spec, double t, const Vector& x,
                            const Vector& w) {
    check_simplex_row(w);
    Vector out = Vector::Zero(spec.state_dim);
    for (int j = 0; j < spec.atom_count(); ++j)
        if (w(j) != 0.0) out += w(j) * spec.drift(t, x, spec.action_grid[static_cast<std::size_t>(j)]);
    return out;
}

inline Matrix relaxed_diffusion(const ProblemSpec& spec, double t, const Vector& x,
                                const Vector& w) {
    check_simplex_row(w);
    Matrix out = Matrix::Zero(spec.state_dim, spec.noise_dim);
    for (int j = 0; j < spec.atom_count(); ++j)
        if (w(j) != 0.0) out += w(j) * spec.diffusion(t, x, spec.action_grid[static_cast<std::size_t>(j)]);
    return out;
}

inline double relaxed_running_cost(const ProblemSpec& spec, double t, const Vector& x,
                                   const Vector& w) {
    check_simplex_row(w);
    double out = 0.0;
    for (int j = 0; j < spec.atom_count(); ++j)
        if (w(j) != 0.0) out += w(j) * spec.running_cost(t, x, spec.action_grid[static_cast<std::size_t>(j)]);
    return out;
}

}  // namespace rclab
