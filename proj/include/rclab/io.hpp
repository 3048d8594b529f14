#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rclab/adjoint.hpp"
#include "rclab/chattering.hpp"
#include "rclab/core.hpp"
#include "rclab/mp_check.hpp"
#include "rclab/simulate.hpp"
#include "rclab/time_grid.hpp"

namespace rclab {

using Json = nlohmann::json;

namespace io {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << content;
}

/// Trajectory export: one row per (path, step) with the state coordinates.
inline std::string trajectories_csv(const TimeGrid& grid, const TrajectoryEnsemble& traj) {
    std::ostringstream out;
    out << "path,step,t";
    for (int c = 0; c < traj.state_dim; ++c) out << ",x" << (c + 1);
    out << "\n";
    for (int p = 0; p < traj.paths; ++p)
        for (int i = 0; i <= traj.steps; ++i) {
            out << p << "," << i << "," << format_double(grid.knot(i));
            const auto x = traj.state(p, i);
            for (int c = 0; c < traj.state_dim; ++c) out << "," << format_double(x(c));
            out << "\n";
        }
    return out.str();
}

inline Json cost_json(const CostEstimate& est) {
    return Json{{"mean", est.mean},
                {"stderr", est.stderr_},
                {"paths", est.paths},
                {"seed", est.seed}};
}

/// Gap table export for convergence plots.
inline std::string gap_reports_csv(const std::vector<GapReport>& reports) {
    std::ostringstream out;
    out << "n,weak_gap,traj_gap,traj_stderr,cost_gap,cost_stderr\n";
    for (const GapReport& rep : reports)
        out << rep.order << "," << format_double(rep.weak) << ","
            << format_double(rep.trajectory) << "," << format_double(rep.trajectory_stderr) << ","
            << format_double(rep.cost) << "," << format_double(rep.cost_stderr) << "\n";
    return out.str();
}

/// Adjoint export: p coordinates then P flattened column-major.
inline std::string adjoint_csv(const TimeGrid& grid, const FirstOrderAdjoint& adj) {
    std::ostringstream out;
    out << "path,step,t";
    for (int c = 0; c < adj.state_dim; ++c) out << ",p" << (c + 1);
    for (int l = 0; l < adj.noise_dim; ++l)
        for (int c = 0; c < adj.state_dim; ++c) out << ",P" << (c + 1) << "_" << (l + 1);
    out << "\n";
    for (int p = 0; p < adj.paths; ++p)
        for (int i = 0; i <= adj.steps; ++i) {
            out << p << "," << i << "," << format_double(grid.knot(i));
            const auto pv = adj.p(p, i);
            for (int c = 0; c < adj.state_dim; ++c) out << "," << format_double(pv(c));
            const auto Pv = adj.P(p, i);
            for (int l = 0; l < adj.noise_dim; ++l)
                for (int c = 0; c < adj.state_dim; ++c) out << "," << format_double(Pv(c, l));
            out << "\n";
        }
    return out.str();
}

/// Relative L2 errors of a solved adjoint against closed-form references.
struct AdjointComparison {
    double rel_l2_error_p = 0.0;
    double rel_l2_error_P = 0.0;
    double rel_l2_error_k = 0.0;
    int paths = 0;
    int basis_degree = 0;
};

inline Json adjoint_comparison_json(const AdjointComparison& cmp) {
    return Json{{"rel_l2_error_p", cmp.rel_l2_error_p},
                {"rel_l2_error_P", cmp.rel_l2_error_P},
                {"rel_l2_error_k", cmp.rel_l2_error_k},
                {"paths", cmp.paths},
                {"basis_degree", cmp.basis_degree}};
}

inline Json mp_report_json(const HamiltonianMinSection& ham, const SingularGlobalSection& global,
                           const SingularIntegralSection& integral, double constant_c, double tol,
                           std::uint64_t seed) {
    return Json{{"hamiltonian_violation_fraction", ham.violation_fraction},
                {"worst_violation", ham.worst_violation},
                {"singular_min_slack", global.min_slack},
                {"complementary_mass", global.complementary_mass},
                {"singular_integral_worst", integral.worst},
                {"params", Json{{"C", constant_c}, {"tol", tol}, {"seed", seed}}}};
}

/// Per-knot checker detail export for plotting.
inline std::string mp_knots_csv(const TimeGrid& grid, const HamiltonianMinSection& ham,
                                const SingularGlobalSection& global) {
    std::ostringstream out;
    out << "step,t,violation_worst,violation_mean,singular_min_slack\n";
    for (int i = 0; i < grid.steps; ++i) {
        out << i << "," << format_double(grid.knot(i)) << ","
            << format_double(ham.per_knot_worst[static_cast<std::size_t>(i)]) << ","
            << format_double(ham.per_knot_mean[static_cast<std::size_t>(i)]) << ","
            << format_double(global.per_knot_min_slack[static_cast<std::size_t>(i)]) << "\n";
    }
    return out.str();
}

}  // namespace io

}  // namespace rclab
