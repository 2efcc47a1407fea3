#pragma once

#include <cstdio>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fhn/errors.hpp"
#include "fhn/random.hpp"

namespace fhn {

// Parameters of the stable law S_alpha(sigma, beta, nu).
struct StableParams {
    double alpha = 1.5; // stability index, (0,2]
    double beta = 0.0;  // skewness, [-1,1]
    double sigma = 1.0; // scale, >= 0
    double nu = 0.0;    // shift

    void validate() const {
        if (!(alpha > 0.0) || !(alpha <= 2.0))
            throw param_error("StableParams: alpha must lie in (0,2], got " + std::to_string(alpha));
        if (!(beta >= -1.0) || !(beta <= 1.0))
            throw param_error("StableParams: beta must lie in [-1,1], got " + std::to_string(beta));
        if (!(sigma >= 0.0))
            throw param_error("StableParams: sigma must be >= 0, got " + std::to_string(sigma));
        if (!std::isfinite(nu))
            throw param_error("StableParams: nu must be finite");
    }
};

// One draw from S_alpha(sigma, beta, nu) by the Chambers-Mallows-Stuck
// construction. alpha = 2 reduces to N(nu, 2 sigma^2).
inline double sample_stable(const StableParams& p, Rng& rng) {
    p.validate();
    if (p.sigma == 0.0) return p.nu;
    if (p.alpha == 2.0) return p.nu + p.sigma * std::sqrt(2.0) * rng.gaussian();

    const double v = M_PI * (rng.uniform() - 0.5); // U(-pi/2, pi/2)
    const double w = rng.exponential();

    if (p.alpha == 1.0) {
        const double half_pi = M_PI / 2.0;
        const double x = (1.0 / half_pi) *
                         ((half_pi + p.beta * v) * std::tan(v) -
                          p.beta * std::log((half_pi * w * std::cos(v)) / (half_pi + p.beta * v)));
        return p.sigma * x + (2.0 / M_PI) * p.beta * p.sigma * std::log(p.sigma) + p.nu;
    }

    const double t = p.beta * std::tan(M_PI * p.alpha / 2.0);
    const double b = std::atan(t) / p.alpha;
    const double s = std::pow(1.0 + t * t, 1.0 / (2.0 * p.alpha));
    const double x = s * std::sin(p.alpha * (v + b)) / std::pow(std::cos(v), 1.0 / p.alpha) *
                     std::pow(std::cos(v - p.alpha * (v + b)) / w, (1.0 - p.alpha) / p.alpha);
    return p.sigma * x + p.nu;
}

// Two-sided cadlag sample path of N independent alpha-stable Levy motions
// on a uniform grid. Grid values are exact in distribution; jumps below dt
// are folded into the increments.
struct StablePath {
    double t_start = 0.0;
    double dt = 0.0;
    std::size_t channels = 0;
    std::vector<std::vector<double>> values; // [channel][node]
    std::uint64_t seed = 0;

    std::size_t n_nodes() const { return channels == 0 ? n_nodes_ : values[0].size(); }
    double t_end() const { return t_start + dt * static_cast<double>(n_nodes() - 1); }
    double time_at(std::size_t k) const { return t_start + dt * static_cast<double>(k); }

    // node index of time t; throws if t is off-grid or outside the window
    std::size_t index_of(double t) const {
        const double raw = (t - t_start) / dt;
        const long long k = std::llround(raw);
        if (std::abs(raw - static_cast<double>(k)) > 1e-9 * (1.0 + std::abs(raw)))
            throw grid_error("StablePath: time " + std::to_string(t) + " is not a grid node");
        if (k < 0 || static_cast<std::size_t>(k) >= n_nodes())
            throw grid_error("StablePath: time " + std::to_string(t) + " outside the sampled window");
        return static_cast<std::size_t>(k);
    }

    std::size_t zero_index() const { return index_of(0.0); }

    // Logical path value: raw grid entry minus the entry at the grid's own
    // time 0. Freshly generated paths store 0.0 there, so the subtraction is
    // exact; shifted paths re-index the same raw array, which keeps the
    // composition of shifts bitwise associative.
    double value(std::size_t channel, std::size_t k) const {
        return values[channel][k] - values[channel][zero_index()];
    }

    // fixture constructor: cumulate explicit increments around t = 0
    static StablePath from_increments(double t_start, double dt,
                                      const std::vector<std::vector<double>>& increments) {
        StablePath p;
        p.t_start = t_start;
        p.dt = dt;
        p.channels = increments.size();
        const std::size_t n = increments.empty() ? 1 : increments[0].size() + 1;
        p.n_nodes_ = n;
        p.values.resize(p.channels);
        for (std::size_t c = 0; c < p.channels; ++c) {
            if (increments[c].size() + 1 != n)
                throw grid_error("from_increments: ragged increment arrays");
            p.values[c].assign(n, 0.0);
            for (std::size_t k = 1; k < n; ++k)
                p.values[c][k] = p.values[c][k - 1] + increments[c][k - 1];
        }
        const std::size_t k0 = p.index_of(0.0);
        for (std::size_t c = 0; c < p.channels; ++c) {
            const double off = p.values[c][k0];
            for (double& x : p.values[c]) x -= off;
        }
        return p;
    }

    std::size_t n_nodes_ = 0; // node count when channels == 0
};

// Sample a two-sided path on [t_start, t_end]. The window must contain 0 as
// a grid node; omega_j(0) = 0 for every channel. Same seed, same bits.
inline StablePath gen_path(const StableParams& p, std::size_t channels, double t_start,
                           double t_end, double dt, std::uint64_t seed) {
    p.validate();
    if (!(dt > 0.0)) throw param_error("gen_path: dt must be > 0");
    if (!(t_start <= 0.0) || !(0.0 <= t_end))
        throw grid_error("gen_path: window must contain 0 (t_start <= 0 <= t_end)");

    const double span = (t_end - t_start) / dt;
    const long long n_cells = std::llround(span);
    if (n_cells < 1 || std::abs(span - static_cast<double>(n_cells)) > 1e-9 * (1.0 + span))
        throw grid_error("gen_path: dt does not divide the window");
    const double zraw = -t_start / dt;
    const long long k0 = std::llround(zraw);
    if (std::abs(zraw - static_cast<double>(k0)) > 1e-9 * (1.0 + zraw))
        throw grid_error("gen_path: 0 is not a grid node");

    StablePath path;
    path.t_start = t_start;
    path.dt = dt;
    path.channels = channels;
    path.seed = seed;
    path.n_nodes_ = static_cast<std::size_t>(n_cells + 1);
    path.values.resize(channels);

    StableParams inc = p;
    inc.sigma = p.sigma * std::pow(dt, 1.0 / p.alpha);
    inc.nu = 0.0;

    const std::size_t n = path.n_nodes_;
    for (std::size_t c = 0; c < channels; ++c) {
        Rng rng(derive_seed(seed, c));
        std::vector<double> cell(n - 1);
        for (double& x : cell) x = sample_stable(inc, rng);
        auto& v = path.values[c];
        v.assign(n, 0.0);
        const std::size_t z = static_cast<std::size_t>(k0);
        for (std::size_t k = z + 1; k < n; ++k) v[k] = v[k - 1] + cell[k - 1];
        for (std::size_t k = z; k-- > 0;) v[k] = v[k + 1] - cell[k];
    }
    return path;
}

// theta_t omega(.) = omega(. + t) - omega(t): pure re-indexing, with the
// subtraction deferred to value(), so composed shifts agree with the single
// shift by the sum bit for bit.
inline StablePath shift_path(const StablePath& path, double t) {
    const std::size_t kt = path.index_of(t);
    StablePath out = path;
    // new grid times are (k - kt) * dt, so the window starts at -kt * dt
    out.t_start = -path.dt * static_cast<double>(kt);
    // the shifted window must still contain its own time 0
    out.index_of(0.0);
    return out;
}

// Subsample to a factor-times-coarser grid (consistent realization of the
// same omega, used for dt-halving studies).
inline StablePath coarsen(const StablePath& path, std::size_t factor) {
    if (factor == 0) throw param_error("coarsen: factor must be >= 1");
    const std::size_t n = path.n_nodes();
    if ((n - 1) % factor != 0 || path.zero_index() % factor != 0)
        throw grid_error("coarsen: grid does not subsample by this factor");
    StablePath out;
    out.t_start = path.t_start;
    out.dt = path.dt * static_cast<double>(factor);
    out.channels = path.channels;
    out.seed = path.seed;
    out.n_nodes_ = (n - 1) / factor + 1;
    out.values.resize(path.channels);
    for (std::size_t c = 0; c < path.channels; ++c) {
        out.values[c].resize(out.n_nodes_);
        for (std::size_t k = 0; k < out.n_nodes_; ++k)
            out.values[c][k] = path.values[c][k * factor];
    }
    return out;
}

// max of |omega(t)/t| over a band of |t|, over all channels
inline double growth_stat_band(const StablePath& path, double lo, double hi) {
    double stat = 0.0;
    for (std::size_t c = 0; c < path.channels; ++c) {
        for (std::size_t k = 0; k < path.n_nodes(); ++k) {
            const double t = path.time_at(k);
            const double a = std::abs(t);
            if (a < lo || a > hi) continue;
            stat = std::max(stat, std::abs(path.value(c, k)) / a);
        }
    }
    return stat;
}

// Sanity statistic for omega(t)/t -> 0: max of |omega(t)/t| over the outer
// half of the window (each side measured by its own extent).
inline double sublinear_growth_stat(const StablePath& path) {
    const double left = -path.t_start;
    const double right = path.t_end();
    if (left + right < 100.0)
        throw data_error("sublinear_growth_stat: window length must be >= 100 time units");
    double stat = 0.0;
    if (left > 0.0) stat = std::max(stat, growth_stat_band(path, left / 2.0, left));
    if (right > 0.0) stat = std::max(stat, growth_stat_band(path, right / 2.0, right));
    return stat;
}

// CSV dump/load: header `t,channel,value`, binary64 text round trip
inline void dump_path_csv(const StablePath& path, std::ostream& os) {
    os << "t,channel,value\n";
    char buf[64];
    for (std::size_t c = 0; c < path.channels; ++c) {
        for (std::size_t k = 0; k < path.n_nodes(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g,%zu,%.17g", path.time_at(k), c,
                          path.value(c, k));
            os << buf << '\n';
        }
    }
}

inline StablePath load_path_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "t,channel,value")
        throw data_error("load_path_csv: missing `t,channel,value` header");
    std::vector<std::vector<double>> cols; // [channel] -> values in order
    std::vector<std::vector<double>> times;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        double t = 0.0, v = 0.0;
        std::size_t c = 0;
        char comma = 0;
        if (!(ss >> t >> comma >> c >> comma >> v))
            throw data_error("load_path_csv: malformed row: " + line);
        if (c >= cols.size()) {
            cols.resize(c + 1);
            times.resize(c + 1);
        }
        cols[c].push_back(v);
        times[c].push_back(t);
    }
    StablePath p;
    p.channels = cols.size();
    p.values = std::move(cols);
    if (p.channels == 0 || times[0].size() < 2)
        throw data_error("load_path_csv: need at least two nodes");
    p.t_start = times[0].front();
    p.dt = times[0][1] - times[0][0];
    p.n_nodes_ = p.values[0].size();
    return p;
}

} // namespace fhn
