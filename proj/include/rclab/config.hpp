#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "rclab/core.hpp"

namespace rclab {

/// One experiment: benchmark, grid, sampling sizes, solver and checker knobs.
/// The seed is mandatory; there are no unseeded runs.
struct ExperimentConfig {
    std::string benchmark;
    std::uint64_t seed = 0;
    int paths = 2000;
    int steps = 50;
    std::string control = "optimal";  ///< "optimal" or "atom:<j>"
    std::string out_dir = "out";
    std::vector<int> chattering_orders = {4, 16, 64};
    int basis_degree = 2;
    double ridge = 1e-8;
    double constant_c = 1.0;
    double tolerance = 1e-6;

    void validate() const {
        if (benchmark.empty()) throw InvalidInputError("config: benchmark id missing");
        if (paths < 1 || steps < 1) throw InvalidInputError("config: sizes must be positive");
        if (basis_degree < 0 || basis_degree > 3)
            throw InvalidInputError("config: basis degree must be in [0, 3]");
        for (int n : chattering_orders)
            if (n < 1) throw InvalidInputError("config: chattering orders must be >= 1");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// Parse the key/value configuration text (sections in brackets, `key =
/// value` lines, `#` comments). A seed is required.
inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    bool seed_seen = false;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = detail::trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw InvalidInputError("config: malformed section at line " + std::to_string(line_no));
            section = stripped.substr(1, stripped.size() - 2);
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw InvalidInputError("config: expected key = value at line " + std::to_string(line_no));
        const std::string key = section + "." + detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));

        if (key == "experiment.benchmark") cfg.benchmark = value;
        else if (key == "experiment.seed") { cfg.seed = std::stoull(value); seed_seen = true; }
        else if (key == "experiment.paths") cfg.paths = std::stoi(value);
        else if (key == "experiment.steps") cfg.steps = std::stoi(value);
        else if (key == "experiment.control") cfg.control = value;
        else if (key == "experiment.out") cfg.out_dir = value;
        else if (key == "chattering.orders") {
            cfg.chattering_orders.clear();
            std::istringstream vs(value);
            int n = 0;
            while (vs >> n) cfg.chattering_orders.push_back(n);
        } else if (key == "adjoint.basis_degree") cfg.basis_degree = std::stoi(value);
        else if (key == "adjoint.ridge") cfg.ridge = std::stod(value);
        else if (key == "checker.constant_c") cfg.constant_c = std::stod(value);
        else if (key == "checker.tolerance") cfg.tolerance = std::stod(value);
        else throw InvalidInputError("config: unknown key '" + key + "'");
    }
    if (!seed_seen) throw InvalidInputError("config: seed is required (no unseeded runs)");
    cfg.validate();
    return cfg;
}

/// Canonical serialization; parsing the result reproduces the config and
/// re-serializing reproduces the bytes, which is what makes the config echo
/// a re-run recipe.
inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[experiment]\n";
    out << "benchmark = " << cfg.benchmark << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "paths = " << cfg.paths << "\n";
    out << "steps = " << cfg.steps << "\n";
    out << "control = " << cfg.control << "\n";
    out << "out = " << cfg.out_dir << "\n";
    out << "\n[chattering]\n";
    out << "orders =";
    for (int n : cfg.chattering_orders) out << " " << n;
    out << "\n";
    out << "\n[adjoint]\n";
    out << "basis_degree = " << cfg.basis_degree << "\n";
    out << "ridge = " << detail::format_double(cfg.ridge) << "\n";
    out << "\n[checker]\n";
    out << "constant_c = " << detail::format_double(cfg.constant_c) << "\n";
    out << "tolerance = " << detail::format_double(cfg.tolerance) << "\n";
    return out.str();
}

}  // namespace rclab
