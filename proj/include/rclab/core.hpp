#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rclab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Vector of n-by-n matrices, one per noise coordinate (the space the paper
/// writes as M^d_{n x n}).
using MatrixList = std::vector<Matrix>;

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A control table is malformed (index out of range, decreasing singular
/// component, wrong length for the grid).
class InvalidControlError : public Error {
public:
    using Error::Error;
};

/// A weight row is off the probability simplex beyond tolerance.
class InvalidMeasureError : public Error {
public:
    using Error::Error;
};

/// Inputs that must refer to the same grid/controls/trajectories do not.
class InconsistentInputError : public Error {
public:
    using Error::Error;
};

/// Malformed argument (empty test family, bad dimensions, bad config).
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// A simulated state became non-finite.
class SimulationDivergedError : public Error {
public:
    SimulationDivergedError(const std::string& what, int path, int step)
        : Error(what), path(path), step(step) {}
    int path;
    int step;
};

/// Regression normal equations are numerically singular.
class IllConditionedBasisError : public Error {
public:
    using Error::Error;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
    return m.allFinite();
}

inline double frobenius_inner(const Matrix& a, const Matrix& b) {
    return (a.array() * b.array()).sum();
}

}  // namespace rclab
