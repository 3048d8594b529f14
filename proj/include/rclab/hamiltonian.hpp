#pragma once

#include <cmath>

#include "rclab/control.hpp"
#include "rclab/core.hpp"
#include "rclab/problem.hpp"

namespace rclab {

/// H(t, x, a, p, P) = h + p.b + sigma.P split into its three components;
/// the value is always their sum.
struct HamiltonianEval {
    double value = 0.0;
    double running_cost = 0.0;   ///< h
    double drift_coupling = 0.0; ///< p.b
    double noise_coupling = 0.0; ///< sigma.P (columnwise inner product)
};

/// Atomic Hamiltonian at action point a.
inline HamiltonianEval hamiltonian(const ProblemSpec& spec, double t, const Vector& x,
                                   const Vector& a, const Vector& p, const Matrix& P) {
    if (x.size() != spec.state_dim || p.size() != spec.state_dim ||
        P.rows() != spec.state_dim || P.cols() != spec.noise_dim)
        throw InvalidInputError("hamiltonian: dimension mismatch");
    HamiltonianEval eval;
    eval.running_cost = spec.running_cost(t, x, a);
    eval.drift_coupling = p.dot(spec.drift(t, x, a));
    eval.noise_coupling = frobenius_inner(spec.diffusion(t, x, a), P);
    eval.value = eval.running_cost + eval.drift_coupling + eval.noise_coupling;
    return eval;
}

inline HamiltonianEval hamiltonian_at_atom(const ProblemSpec& spec, double t, const Vector& x,
                                           int atom, const Vector& p, const Matrix& P) {
    return hamiltonian(spec, t, x, spec.action_grid[static_cast<std::size_t>(atom)], p, P);
}

/// Relaxed Hamiltonian: weight-average of the atomic values.
inline HamiltonianEval relaxed_hamiltonian(const ProblemSpec& spec, double t, const Vector& x,
                                           const Vector& weights, const Vector& p,
                                           const Matrix& P) {
    check_simplex_row(weights);
    HamiltonianEval eval;
    for (int j = 0; j < spec.atom_count(); ++j) {
        if (weights(j) == 0.0) continue;
        const HamiltonianEval atom = hamiltonian_at_atom(spec, t, x, j, p, P);
        eval.running_cost += weights(j) * atom.running_cost;
        eval.drift_coupling += weights(j) * atom.drift_coupling;
        eval.noise_coupling += weights(j) * atom.noise_coupling;
    }
    eval.value = eval.running_cost + eval.drift_coupling + eval.noise_coupling;
    return eval;
}

/// Gradient of H in x assembled from the coefficient derivatives:
/// H_x = h_x + b_x^T p + sum_l (sigma_x^l)^T P_l.
inline Vector hamiltonian_gradient(const ProblemSpec& spec, double t, const Vector& x,
                                   const Vector& a, const Vector& p, const Matrix& P) {
    Vector grad = spec.running_cost_gradient(t, x, a);
    grad += spec.drift_jacobian(t, x, a).transpose() * p;
    const MatrixList sig_x = spec.diffusion_jacobian(t, x, a);
    for (int l = 0; l < spec.noise_dim; ++l)
        grad += sig_x[static_cast<std::size_t>(l)].transpose() * P.col(l);
    return grad;
}

/// Relaxed gradient: weight-average of atomic gradients (exact by linearity
/// of the measure integral).
inline Vector relaxed_hamiltonian_gradient(const ProblemSpec& spec, double t, const Vector& x,
                                           const Vector& weights, const Vector& p,
                                           const Matrix& P) {
    Vector grad = Vector::Zero(spec.state_dim);
    for (int j = 0; j < spec.atom_count(); ++j)
        if (weights(j) != 0.0)
            grad += weights(j) * hamiltonian_gradient(
                                     spec, t, x, spec.action_grid[static_cast<std::size_t>(j)], p, P);
    return grad;
}

/// Hessian of H in x: the analytic oracle when present, otherwise second
/// central differences of the Hamiltonian value.
inline Matrix hamiltonian_hessian(const ProblemSpec& spec, double t, const Vector& x,
                                  const Vector& a, const Vector& p, const Matrix& P) {
    if (spec.oracles.hamiltonian_xx) return spec.oracles.hamiltonian_xx(t, x, a, p, P);
    const double h = spec.fd_step_hessian(x);
    const int n = spec.state_dim;
    auto value = [&](const Vector& xv) { return hamiltonian(spec, t, xv, a, p, P).value; };
    Matrix hess(n, n);
    const double f0 = value(x);
    Vector xs = x;
    for (int j = 0; j < n; ++j) {
        xs(j) = x(j) + h;
        const double fp = value(xs);
        xs(j) = x(j) - h;
        const double fm = value(xs);
        xs(j) = x(j);
        hess(j, j) = (fp - 2.0 * f0 + fm) / (h * h);
        for (int l = j + 1; l < n; ++l) {
            xs(j) = x(j) + h; xs(l) = x(l) + h;
            const double fpp = value(xs);
            xs(l) = x(l) - h;
            const double fpm = value(xs);
            xs(j) = x(j) - h; xs(l) = x(l) + h;
            const double fmp = value(xs);
            xs(l) = x(l) - h;
            const double fmm = value(xs);
            xs(j) = x(j); xs(l) = x(l);
            hess(j, l) = hess(l, j) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    }
    return hess;
}

inline Matrix relaxed_hamiltonian_hessian(const ProblemSpec& spec, double t, const Vector& x,
                                          const Vector& weights, const Vector& p,
                                          const Matrix& P) {
    Matrix hess = Matrix::Zero(spec.state_dim, spec.state_dim);
    for (int j = 0; j < spec.atom_count(); ++j)
        if (weights(j) != 0.0)
            hess += weights(j) * hamiltonian_hessian(
                                     spec, t, x, spec.action_grid[static_cast<std::size_t>(j)], p, P);
    return hess;
}

/// Second-order correction term (1/2) Tr[sigma sigma* k] at one atom.
inline double trace_correction(const ProblemSpec& spec, double t, const Vector& x,
                               const Vector& a, const Matrix& k) {
    const Matrix sig = spec.diffusion(t, x, a);
    return 0.5 * (sig * sig.transpose() * k).trace();
}

/// Generalized Hamiltonian for evaluation measure q against a fixed reference
/// measure mu_ref (the candidate optimal):
///   H(t, x, q, p, P - k sigma(mu_ref)) + (1/2) sum_j q_j Tr[sigma sigma*(a_j) k].
/// Holding sigma(mu_ref) fixed in the shifted slot makes the expression
/// affine in q, so its infimum over the simplex is attained at an atom.
inline double generalized_hamiltonian(const ProblemSpec& spec, double t, const Vector& x,
                                      const Vector& q_weights, const Vector& p, const Matrix& P,
                                      const Matrix& k, const Vector& mu_ref_weights) {
    const Matrix sigma_ref = relaxed_diffusion(spec, t, x, mu_ref_weights);
    const Matrix shifted = P - k * sigma_ref;
    check_simplex_row(q_weights);
    double value = 0.0;
    for (int j = 0; j < spec.atom_count(); ++j) {
        if (q_weights(j) == 0.0) continue;
        const Vector& a = spec.action_grid[static_cast<std::size_t>(j)];
        value += q_weights(j) *
                 (hamiltonian(spec, t, x, a, p, shifted).value + trace_correction(spec, t, x, a, k));
    }
    return value;
}

/// Atomic generalized Hamiltonian with a precomputed shifted P slot.
inline double generalized_hamiltonian_atom(const ProblemSpec& spec, double t, const Vector& x,
                                           int atom, const Vector& p, const Matrix& shifted_P,
                                           const Matrix& k) {
    const Vector& a = spec.action_grid[static_cast<std::size_t>(atom)];
    return hamiltonian(spec, t, x, a, p, shifted_P).value + trace_correction(spec, t, x, a, k);
}

}  // namespace rclab
