#pragma once

#include <cmath>
#include <vector>

#include "rclab/core.hpp"

namespace rclab {

/// Polynomial features of the state for the backward regressions: monomials
/// up to total degree `degree` (degree 2 by default: constant, coordinates,
/// squares and cross terms).
struct RegressionBasis {
    int degree = 2;
    double ridge = 1e-8;

    int feature_count(int state_dim) const {
        int count = 1;
        if (degree >= 1) count += state_dim;
        if (degree >= 2) count += state_dim * (state_dim + 1) / 2;
        if (degree >= 3) {
            int cubes = 0;
            for (int a = 0; a < state_dim; ++a)
                for (int b = a; b < state_dim; ++b)
                    for (int c = b; c < state_dim; ++c) ++cubes;
            count += cubes;
        }
        return count;
    }

    Eigen::RowVectorXd features(const Vector& x) const {
        Eigen::RowVectorXd out(feature_count(static_cast<int>(x.size())));
        int idx = 0;
        out(idx++) = 1.0;
        const int n = static_cast<int>(x.size());
        if (degree >= 1)
            for (int a = 0; a < n; ++a) out(idx++) = x(a);
        if (degree >= 2)
            for (int a = 0; a < n; ++a)
                for (int b = a; b < n; ++b) out(idx++) = x(a) * x(b);
        if (degree >= 3)
            for (int a = 0; a < n; ++a)
                for (int b = a; b < n; ++b)
                    for (int c = b; c < n; ++c) out(idx++) = x(a) * x(b) * x(c);
        return out;
    }
};

/// Ridge least squares of multi-output targets on a feature matrix; returns
/// the fitted values (the regression-projected conditional expectations).
/// Throws IllConditionedBasisError when the normal equations are numerically
/// singular and no ridge is in force.
inline Matrix regress_fitted(const Matrix& phi, const Matrix& targets, double ridge) {
    const auto rows = phi.rows();
    if (targets.rows() != rows)
        throw InconsistentInputError("regression: target rows != feature rows");
    Matrix gram = phi.transpose() * phi;
    gram.diagonal().array() += ridge;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw IllConditionedBasisError(
            "regression normal equations are singular; increase the ridge parameter");
    if (ridge == 0.0) {
        const Vector d = ldlt.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        if (!(d.cwiseAbs().minCoeff() > dmax * 1e-14))
            throw IllConditionedBasisError(
                "regression normal equations are singular; increase the ridge parameter");
    }
    Matrix coeffs = ldlt.solve(phi.transpose() * targets);
    if (!coeffs.allFinite())
        throw IllConditionedBasisError(
            "regression produced non-finite coefficients; increase the ridge parameter");
    return phi * coeffs;
}

/// Regression variant for feature matrices whose first column is the
/// constant 1: the remaining columns are centered and scaled to unit spread
/// (degenerate ones are dropped) and the ridge penalty skips the intercept.
/// Constant targets are therefore reproduced exactly, which keeps the
/// martingale estimates silent when the adjoint carries no noise.
inline Matrix regress_fitted_intercept(const Matrix& phi, const Matrix& targets, double ridge) {
    const auto rows = phi.rows();
    const auto cols = phi.cols();
    if (targets.rows() != rows)
        throw InconsistentInputError("regression: target rows != feature rows");

    // Standardize the non-intercept columns; keep only those with spread.
    std::vector<int> kept;
    Matrix std_phi(rows, cols);
    std_phi.col(0).setOnes();
    kept.push_back(0);
    for (int j = 1; j < cols; ++j) {
        const double mean = phi.col(j).mean();
        const double spread = std::sqrt((phi.col(j).array() - mean).square().mean());
        if (spread > 1e-13 * (1.0 + std::abs(mean))) {
            std_phi.col(static_cast<int>(kept.size())) = (phi.col(j).array() - mean) / spread;
            kept.push_back(j);
        }
    }
    const int b = static_cast<int>(kept.size());
    const auto active = std_phi.leftCols(b);

    Matrix gram = active.transpose() * active;
    for (int j = 1; j < b; ++j) gram(j, j) += ridge;  // intercept unpenalized
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw IllConditionedBasisError(
            "regression normal equations are singular; increase the ridge parameter");
    if (ridge == 0.0) {
        const Vector d = ldlt.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        if (!(d.cwiseAbs().minCoeff() > dmax * 1e-14))
            throw IllConditionedBasisError(
                "regression normal equations are singular; increase the ridge parameter");
    }
    Matrix coeffs = ldlt.solve(active.transpose() * targets);
    if (!coeffs.allFinite())
        throw IllConditionedBasisError(
            "regression produced non-finite coefficients; increase the ridge parameter");
    return active * coeffs;
}

}  // namespace rclab
