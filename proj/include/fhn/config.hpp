#pragma once

#include <type_traits>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "fhn/errors.hpp"
#include "fhn/lattice.hpp"

namespace fhn {

// Everything a reproducible run needs, with documented defaults.
// File grammar: `[section]` headers, `key = value` lines, `#` comments.
struct ExperimentConfig {
    // [system]
    double lambda = 1.0;
    double rho = 1.0;
    double varpi = 1.0;
    double kappa = 1.0;
    double f_sign = -1.0;
    int I = 64;
    double forcing_amplitude = 1.0;
    double forcing_decay = 8.0;

    // [noise]
    double alpha = 1.5;
    std::vector<double> epsilons{0.2};
    double noise_dt = 0.01;
    double trunc_T = 40.0;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

    // [solver]
    double solver_dt = 0.01;
    double t_span = 20.0;

    // [experiment]
    std::vector<double> t_grid{1, 2, 5, 10, 20, 40};
    std::vector<int> N_grid{4, 8, 16, 24};
    double eps = 1e-2;
    double B_radius = 10.0;
    double gamma = 0.1;
    double quad_horizon = 60.0;
    std::size_t m_points = 8;
    std::vector<double> pullback_schedule{5, 10, 20, 40};
    double tempered_t_max = 200.0;
    double tempered_t_step = 5.0;

    // [output]
    std::string out_dir = "out";

    int refine() const {
        const double r = noise_dt / solver_dt;
        return static_cast<int>(r + 0.5);
    }

    SystemParams system_params() const {
        SystemParams p;
        p.lambda = lambda;
        p.rho = rho;
        p.varpi = varpi;
        p.kappa = kappa;
        p.f_sign = f_sign;
        p.I = I;
        p.alpha = alpha;
        p.epsilons = epsilons;
        p.h = exp_profile(I, forcing_amplitude, forcing_decay);
        p.g = exp_profile(I, forcing_amplitude, forcing_decay);
        return p;
    }

    void validate() const {
        auto fail = [](const std::string& key, const std::string& what) {
            throw config_error("config: " + key + " " + what);
        };
        if (!(alpha > 1.0 && alpha < 2.0)) fail("noise.alpha", "must lie in (1,2)");
        if (!(lambda > 0.0)) fail("system.lambda", "must be > 0");
        if (!(rho > 0.0)) fail("system.rho", "must be > 0");
        if (!(varpi > 0.0)) fail("system.varpi", "must be > 0");
        if (!(kappa >= 0.0)) fail("system.kappa", "must be >= 0");
        if (f_sign != 1.0 && f_sign != -1.0) fail("system.f_sign", "must be +1 or -1");
        if (I < 2) fail("system.I", "must be >= 2");
        if (!(noise_dt > 0.0)) fail("noise.dt", "must be > 0");
        if (!(solver_dt > 0.0)) fail("solver.dt", "must be > 0");
        const double r = noise_dt / solver_dt;
        if (std::abs(r - std::round(r)) > 1e-9 || r < 1.0 - 1e-9)
            fail("solver.dt", "must refine noise.dt by an integer factor");
        if (!(trunc_T >= 30.0)) fail("noise.trunc_T", "must be >= 30");
        if (!(t_span > 0.0)) fail("solver.t_span", "must be > 0");
        if (!(eps > 0.0)) fail("experiment.eps", "must be > 0");
        if (!(gamma > 0.0)) fail("experiment.gamma", "must be > 0");
        if (!(quad_horizon > 0.0)) fail("experiment.quad_horizon", "must be > 0");
        if (m_points < 1) fail("experiment.m_points", "must be >= 1");
        for (int N : N_grid)
            if (N < 1 || 2 * N >= I) fail("experiment.N_grid", "needs 1 <= N and 2N < system.I");
        if (seeds.empty()) fail("noise.seeds", "must be nonempty");
        if (epsilons.empty()) fail("noise.epsilons", "must be nonempty (use 0 for noise-free)");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& val, int line) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(val, &pos);
    } catch (const std::exception&) {
        throw config_error("config line " + std::to_string(line) + ": " + key +
                           " expects a number, got `" + val + "`");
    }
    if (pos != val.size())
        throw config_error("config line " + std::to_string(line) + ": " + key +
                           " has trailing characters in `" + val + "`");
    return x;
}

inline long long parse_int(const std::string& key, const std::string& val, int line) {
    const double x = parse_double(key, val, line);
    const long long k = std::llround(x);
    if (static_cast<double>(k) != x)
        throw config_error("config line " + std::to_string(line) + ": " + key +
                           " expects an integer, got `" + val + "`");
    return k;
}

template <class T, class Fn>
inline std::vector<T> parse_list(const std::string& key, const std::string& val, int line,
                                 Fn&& one) {
    std::vector<T> out;
    std::stringstream ss(val);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw config_error("config line " + std::to_string(line) + ": " + key +
                               " has an empty list element");
        out.push_back(one(key, item, line));
    }
    if (out.empty())
        throw config_error("config line " + std::to_string(line) + ": " + key +
                           " expects a comma-separated list");
    return out;
}

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

template <class T>
inline std::string fmt_list(const std::vector<T>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ",";
        if constexpr (std::is_floating_point_v<T>)
            s += fmt(xs[i]);
        else
            s += std::to_string(xs[i]);
    }
    return s;
}

} // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        std::string s = raw;
        const auto hash = s.find('#');
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw config_error("config line " + std::to_string(line) + ": malformed section `" +
                                   raw + "`");
            section = detail::trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(line) + ": expected `key = value`, got `" +
                               raw + "`");
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string val = detail::trim(s.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;

        using detail::parse_double;
        using detail::parse_int;
        auto dbl = [&] { return parse_double(full, val, line); };
        auto num = [&] { return parse_int(full, val, line); };

        if (full == "system.lambda") cfg.lambda = dbl();
        else if (full == "system.rho") cfg.rho = dbl();
        else if (full == "system.varpi") cfg.varpi = dbl();
        else if (full == "system.kappa") cfg.kappa = dbl();
        else if (full == "system.f_sign") cfg.f_sign = dbl();
        else if (full == "system.I") cfg.I = static_cast<int>(num());
        else if (full == "system.forcing_amplitude") cfg.forcing_amplitude = dbl();
        else if (full == "system.forcing_decay") cfg.forcing_decay = dbl();
        else if (full == "noise.alpha") cfg.alpha = dbl();
        else if (full == "noise.epsilons")
            cfg.epsilons = detail::parse_list<double>(full, val, line, parse_double);
        else if (full == "noise.dt") cfg.noise_dt = dbl();
        else if (full == "noise.trunc_T") cfg.trunc_T = dbl();
        else if (full == "noise.seeds")
            cfg.seeds = detail::parse_list<std::uint64_t>(
                full, val, line, [](const std::string& k, const std::string& v, int l) {
                    return static_cast<std::uint64_t>(detail::parse_int(k, v, l));
                });
        else if (full == "solver.dt") cfg.solver_dt = dbl();
        else if (full == "solver.t_span") cfg.t_span = dbl();
        else if (full == "experiment.t_grid")
            cfg.t_grid = detail::parse_list<double>(full, val, line, parse_double);
        else if (full == "experiment.N_grid")
            cfg.N_grid = detail::parse_list<int>(
                full, val, line, [](const std::string& k, const std::string& v, int l) {
                    return static_cast<int>(detail::parse_int(k, v, l));
                });
        else if (full == "experiment.eps") cfg.eps = dbl();
        else if (full == "experiment.B_radius") cfg.B_radius = dbl();
        else if (full == "experiment.gamma") cfg.gamma = dbl();
        else if (full == "experiment.quad_horizon") cfg.quad_horizon = dbl();
        else if (full == "experiment.m_points") cfg.m_points = static_cast<std::size_t>(num());
        else if (full == "experiment.pullback_schedule")
            cfg.pullback_schedule = detail::parse_list<double>(full, val, line, parse_double);
        else if (full == "experiment.tempered_t_max") cfg.tempered_t_max = dbl();
        else if (full == "experiment.tempered_t_step") cfg.tempered_t_step = dbl();
        else if (full == "output.dir") cfg.out_dir = val;
        else
            throw config_error("config line " + std::to_string(line) + ": unknown key `" + full +
                               "`");
    }
    cfg.validate();
    return cfg;
}

inline std::string serialize_config(const ExperimentConfig& c) {
    using detail::fmt;
    using detail::fmt_list;
    std::ostringstream os;
    os << "[system]\n"
       << "lambda = " << fmt(c.lambda) << "\n"
       << "rho = " << fmt(c.rho) << "\n"
       << "varpi = " << fmt(c.varpi) << "\n"
       << "kappa = " << fmt(c.kappa) << "\n"
       << "f_sign = " << fmt(c.f_sign) << "\n"
       << "I = " << c.I << "\n"
       << "forcing_amplitude = " << fmt(c.forcing_amplitude) << "\n"
       << "forcing_decay = " << fmt(c.forcing_decay) << "\n"
       << "\n[noise]\n"
       << "alpha = " << fmt(c.alpha) << "\n"
       << "epsilons = " << fmt_list(c.epsilons) << "\n"
       << "dt = " << fmt(c.noise_dt) << "\n"
       << "trunc_T = " << fmt(c.trunc_T) << "\n"
       << "seeds = " << fmt_list(c.seeds) << "\n"
       << "\n[solver]\n"
       << "dt = " << fmt(c.solver_dt) << "\n"
       << "t_span = " << fmt(c.t_span) << "\n"
       << "\n[experiment]\n"
       << "t_grid = " << fmt_list(c.t_grid) << "\n"
       << "N_grid = " << fmt_list(c.N_grid) << "\n"
       << "eps = " << fmt(c.eps) << "\n"
       << "B_radius = " << fmt(c.B_radius) << "\n"
       << "gamma = " << fmt(c.gamma) << "\n"
       << "quad_horizon = " << fmt(c.quad_horizon) << "\n"
       << "m_points = " << c.m_points << "\n"
       << "pullback_schedule = " << fmt_list(c.pullback_schedule) << "\n"
       << "tempered_t_max = " << fmt(c.tempered_t_max) << "\n"
       << "tempered_t_step = " << fmt(c.tempered_t_step) << "\n"
       << "\n[output]\n"
       << "dir = " << c.out_dir << "\n";
    return os.str();
}

// FNV-1a over the canonical serialization; identifies a run in the manifest
inline std::uint64_t config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace fhn
