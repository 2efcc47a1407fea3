#pragma once

#include <cstdio>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "fhn/errors.hpp"
#include "fhn/stable.hpp"

namespace fhn {

// z(theta_t omega) with the truncation-error bound reported alongside
struct OuValue {
    double value = 0.0;
    double trunc_bound = 0.0;
};

// Stationary OU value z(theta_t omega) = -int_{-T}^0 e^s theta_t omega(s) ds
// by composite trapezoid on the path grid. trunc_T >= 30 keeps the truncated
// tail below the quadrature error for any subexponential path.
inline OuValue ou_at(const StablePath& path, std::size_t channel, double t, double trunc_T) {
    if (!(trunc_T >= 30.0)) throw param_error("ou_at: trunc_T must be >= 30");
    const std::size_t kt = path.index_of(t);
    const double lo_raw = (t - trunc_T - path.t_start) / path.dt;
    const long long klo = std::llround(lo_raw);
    if (klo < 0 || std::abs(lo_raw - static_cast<double>(klo)) > 1e-9 * (1.0 + std::abs(lo_raw)))
        throw grid_error("ou_at: quadrature window [t - trunc_T, t] leaves the sampled path");

    const double omega_t = path.value(channel, kt);
    const std::size_t n = kt - static_cast<std::size_t>(klo); // cells
    double acc = 0.0;
    double envelope = 0.0;
    double prev = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
        const std::size_t k = static_cast<std::size_t>(klo) + j;
        const double s = -trunc_T + path.dt * static_cast<double>(j);
        const double shifted = path.value(channel, k) - omega_t; // theta_t omega(s)
        const double integrand = std::exp(s) * shifted;
        envelope = std::max(envelope, std::abs(shifted) / (1.0 + std::abs(s)));
        if (j > 0) acc += 0.5 * path.dt * (prev + integrand);
        prev = integrand;
    }
    // |int_{-inf}^{-T} e^s C(1+|s|) ds| = C e^{-T} (T + 2)
    return {-acc, std::exp(-trunc_T) * envelope * (trunc_T + 2.0)};
}

// z on every grid node of [t_from, t_to]: quadrature at the first node, then
// the drift-exact recursion z(t+dt) = e^{-dt} z(t) + dL with the one-step
// stochastic convolution replaced by the raw increment (weak error O(dt)).
inline std::vector<double> ou_series(const StablePath& path, std::size_t channel, double trunc_T,
                                     double t_from, double t_to) {
    const std::size_t k_from = path.index_of(t_from);
    const std::size_t k_to = path.index_of(t_to);
    if (k_to < k_from) throw grid_error("ou_series: t_to < t_from");
    std::vector<double> z(k_to - k_from + 1);
    z[0] = ou_at(path, channel, t_from, trunc_T).value;
    const double decay = std::exp(-path.dt);
    for (std::size_t k = k_from; k < k_to; ++k) {
        const double inc = path.value(channel, k + 1) - path.value(channel, k);
        z[k - k_from + 1] = decay * z[k - k_from] + inc;
    }
    return z;
}

// xi[k] = sum_j eps_j z_j[k]
inline std::vector<double> xi_series(const std::vector<std::vector<double>>& z,
                                     const std::vector<double>& epsilons) {
    if (z.size() != epsilons.size())
        throw data_error("xi_series: channel/epsilon count mismatch (" + std::to_string(z.size()) +
                         " vs " + std::to_string(epsilons.size()) + ")");
    std::size_t n = 0;
    for (const auto& zc : z) {
        if (n == 0) n = zc.size();
        if (zc.size() != n) throw data_error("xi_series: ragged z arrays");
    }
    std::vector<double> xi(n, 0.0);
    for (std::size_t c = 0; c < z.size(); ++c)
        for (std::size_t k = 0; k < n; ++k) xi[k] += epsilons[c] * z[c][k];
    return xi;
}

// Grid samples of z_j(theta_t omega) and the aggregate xi(theta_t omega)
struct OUSeries {
    double t_start = 0.0;
    double dt = 0.0;
    std::vector<std::vector<double>> z; // [channel][node]
    std::vector<double> xi;
    std::vector<double> epsilons;
    double trunc_T = 40.0;

    std::size_t n_nodes() const { return xi.size(); }
    double time_at(std::size_t k) const { return t_start + dt * static_cast<double>(k); }

    std::size_t index_of(double t) const {
        const double raw = (t - t_start) / dt;
        const long long k = std::llround(raw);
        if (std::abs(raw - static_cast<double>(k)) > 1e-9 * (1.0 + std::abs(raw)))
            throw grid_error("OUSeries: time " + std::to_string(t) + " is not a grid node");
        if (k < 0 || static_cast<std::size_t>(k) >= n_nodes())
            throw grid_error("OUSeries: time " + std::to_string(t) + " outside the series");
        return static_cast<std::size_t>(k);
    }
};

inline OUSeries make_ou_series(const StablePath& path, const std::vector<double>& epsilons,
                               double trunc_T, double t_from, double t_to) {
    if (path.channels != epsilons.size())
        throw data_error("make_ou_series: path channels and epsilons must match");
    OUSeries ou;
    ou.t_start = path.time_at(path.index_of(t_from));
    ou.dt = path.dt;
    ou.epsilons = epsilons;
    ou.trunc_T = trunc_T;
    ou.z.reserve(path.channels);
    for (std::size_t c = 0; c < path.channels; ++c)
        ou.z.push_back(ou_series(path, c, trunc_T, t_from, t_to));
    if (path.channels == 0) {
        const std::size_t n = path.index_of(t_to) - path.index_of(t_from) + 1;
        ou.xi.assign(n, 0.0);
    } else {
        ou.xi = xi_series(ou.z, epsilons);
    }
    return ou;
}

// conjugacy scalar e^{xi}; |xi| > 700 signals a pathological path
inline double lambda_factor(double xi) {
    if (std::abs(xi) > 700.0)
        throw diagnostic_error("lambda_factor: |xi| = " + std::to_string(std::abs(xi)) +
                               " > 700, exp overflow (pathological path or wrong trunc_T)");
    return std::exp(xi);
}

inline double lambda_inverse(double xi) { return lambda_factor(-xi); }

// e^{-gamma t} r(theta_{-t} omega) and a monotone-trend verdict
struct TemperednessReport {
    std::vector<double> t;
    std::vector<double> scaled;
    bool decays = false;
};

inline TemperednessReport temperedness_stat(const std::vector<double>& t_grid,
                                            const std::vector<double>& r, double gamma) {
    if (!(gamma > 0.0)) throw param_error("temperedness_stat: gamma must be > 0");
    if (t_grid.size() != r.size() || t_grid.empty())
        throw data_error("temperedness_stat: t-grid/values mismatch");
    if (t_grid.back() - t_grid.front() < 100.0)
        throw data_error("temperedness_stat: t-grid must span >= 100 units");
    TemperednessReport rep;
    rep.t = t_grid;
    rep.scaled.resize(r.size());
    for (std::size_t k = 0; k < r.size(); ++k)
        rep.scaled[k] = std::exp(-gamma * t_grid[k]) * r[k];
    const std::size_t n = r.size();
    const std::size_t decile = std::max<std::size_t>(1, n / 10);
    double first_min = rep.scaled[0];
    for (std::size_t k = 0; k < decile; ++k) first_min = std::min(first_min, rep.scaled[k]);
    double last_max = 0.0;
    for (std::size_t k = n - decile; k < n; ++k) last_max = std::max(last_max, rep.scaled[k]);
    rep.decays = last_max < first_min / 10.0;
    return rep;
}

// CSV dump: `t,z_1..z_N,xi`
inline void dump_ou_csv(const OUSeries& ou, std::ostream& os) {
    os << "t";
    for (std::size_t c = 0; c < ou.z.size(); ++c) os << ",z_" << (c + 1);
    os << ",xi\n";
    char buf[64];
    for (std::size_t k = 0; k < ou.n_nodes(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", ou.time_at(k));
        os << buf;
        for (std::size_t c = 0; c < ou.z.size(); ++c) {
            std::snprintf(buf, sizeof(buf), ",%.17g", ou.z[c][k]);
            os << buf;
        }
        std::snprintf(buf, sizeof(buf), ",%.17g", ou.xi[k]);
        os << buf << '\n';
    }
}

} // namespace fhn
