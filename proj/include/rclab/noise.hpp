#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rclab/core.hpp"
#include "rclab/parallel.hpp"
#include "rclab/rng.hpp"

namespace rclab {

/// Gaussian increments dW[path][step] in R^d with covariance dt*I, generated
/// from a counter-based stream keyed by (seed, path, master step, component).
/// With substeps > 1 each increment is the sum of `substeps` master draws, so
/// grids of different refinement built over the same master resolution share
/// one Brownian path.
struct NoiseEnsemble {
    std::uint64_t seed = 0;
    int paths = 0;
    int steps = 0;
    int dim = 0;
    double dt = 0.0;
    int substeps = 1;
    std::vector<double> data;  ///< paths x steps x dim

    static NoiseEnsemble generate(std::uint64_t seed, int paths, int steps, int dim,
                                  double dt, int substeps = 1, int workers = 0) {
        if (paths < 1 || steps < 1 || dim < 1 || substeps < 1)
            throw InvalidInputError("NoiseEnsemble: sizes must be positive");
        NoiseEnsemble noise;
        noise.seed = seed;
        noise.paths = paths;
        noise.steps = steps;
        noise.dim = dim;
        noise.dt = dt;
        noise.substeps = substeps;
        noise.data.resize(static_cast<std::size_t>(paths) * steps * dim);
        const double scale = std::sqrt(dt / substeps);
        parallel_for(0, paths, workers, [&](int p) {
            double* row = noise.data.data() + static_cast<std::size_t>(p) * steps * dim;
            for (int i = 0; i < steps; ++i)
                for (int c = 0; c < dim; ++c) {
                    double sum = 0.0;
                    for (int u = 0; u < substeps; ++u)
                        sum += rng::path_normal(seed, static_cast<std::uint64_t>(p),
                                                static_cast<std::uint64_t>(i) * substeps + u,
                                                static_cast<std::uint64_t>(c));
                    row[static_cast<std::size_t>(i) * dim + c] = scale * sum;
                }
        });
        return noise;
    }

    Eigen::Map<const Vector> increment(int path, int step) const {
        return Eigen::Map<const Vector>(
            data.data() + (static_cast<std::size_t>(path) * steps + step) * dim, dim);
    }

    /// Largest per-component magnitude of the cross-path sample mean, in units
    /// of sqrt(dt / paths); the invariant bound is 5.
    double mean_bound_units() const {
        double worst = 0.0;
        for (int i = 0; i < steps; ++i)
            for (int c = 0; c < dim; ++c) {
                double sum = 0.0;
                for (int p = 0; p < paths; ++p)
                    sum += data[(static_cast<std::size_t>(p) * steps + i) * dim + c];
                worst = std::max(worst, std::abs(sum / paths));
            }
        return worst / std::sqrt(dt / paths);
    }
};

}  // namespace rclab
