#pragma once

#include <cmath>

#include "rclab/core.hpp"

namespace rclab {

/// Uniform discretization of [0, T]. Knots are computed as T*i/N so that
/// knot(0) == 0 and knot(N) == T exactly; integration uses the per-step
/// difference knot(i+1) - knot(i), which telescopes exactly to T.
struct TimeGrid {
    int steps = 1;
    double horizon = 1.0;

    TimeGrid() = default;
    TimeGrid(int steps, double horizon) : steps(steps), horizon(horizon) {
        if (steps < 1) throw InvalidInputError("TimeGrid: steps must be >= 1");
        if (!(horizon > 0.0) || !std::isfinite(horizon))
            throw InvalidInputError("TimeGrid: horizon must be finite and positive");
    }

    double knot(int i) const {
        return horizon * static_cast<double>(i) / static_cast<double>(steps);
    }

    /// Nominal step size (used for noise variance).
    double dt() const { return horizon / static_cast<double>(steps); }

    /// Exact step length between consecutive knots.
    double step_length(int i) const { return knot(i + 1) - knot(i); }

    /// Grid with each step subdivided `factor` times. Shared knots of the two
    /// grids coincide bit-exactly.
    TimeGrid refined(int factor) const {
        if (factor < 1) throw InvalidInputError("TimeGrid: refinement factor must be >= 1");
        return TimeGrid(steps * factor, horizon);
    }

    bool operator==(const TimeGrid& other) const {
        return steps == other.steps && horizon == other.horizon;
    }
};

}  // namespace rclab
