#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fhn/errors.hpp"
#include "fhn/lattice.hpp"
#include "fhn/ou.hpp"
#include "fhn/random.hpp"
#include "fhn/solver.hpp"
#include "fhn/stable.hpp"

namespace fhn {

// Cubic smoothstep cutoff: 0 below 1, 1 above 2, 3(s-1)^2 - 2(s-1)^3 between.
// Max slope 3/2 at s = 3/2, which fixes the constant c0.
inline constexpr double kCutoffC0 = 1.5;

inline double cutoff_rho(double s) {
    if (s <= 1.0) return 0.0;
    if (s >= 2.0) return 1.0;
    const double x = s - 1.0;
    return 3.0 * x * x - 2.0 * x * x * x;
}

inline double cutoff_c2(double rho) { return 4.0 * kCutoffC0 / std::min(1.0, 1.0 / rho); }

// Absorbing radius R^2(omega) and its quadrature metadata
struct AbsorbingEstimate {
    double R2 = 1.0;
    double quad_horizon = 0.0;
    double c1 = 0.0;
    double delta = 0.0;
    double c2 = 0.0;
    double tail = 0.0; // integrand at the horizon, must be < 1e-12
};

// R^2 = 1 + c1 (||h||^2 + ||g||^2) int_{-H}^0 exp(-2xi(theta_s omega)
// + delta s - 2 int_s^0 xi(theta_r omega) dr) ds, evaluated at the shifted
// fiber theta_{at_time} omega. The inner integral is a suffix cumulative
// trapezoid, so the nested quadrature is O(n).
inline AbsorbingEstimate absorbing_radius(const OUSeries& ou, const SystemParams& p,
                                          double at_time, double horizon) {
    const std::size_t k_end = ou.index_of(at_time);
    const std::size_t k_lo = ou.index_of(at_time - horizon);
    const double dt = ou.dt;
    const double delta = p.delta();

    const std::size_t n = k_end - k_lo;
    std::vector<double> suffix(n + 1, 0.0); // int_s^0 xi(theta_{r+at} omega) dr
    for (std::size_t j = n; j-- > 0;)
        suffix[j] = suffix[j + 1] + 0.5 * dt * (ou.xi[k_lo + j] + ou.xi[k_lo + j + 1]);

    auto integrand = [&](std::size_t j) {
        const double s = -horizon + dt * static_cast<double>(j);
        return std::exp(-2.0 * ou.xi[k_lo + j] + delta * s - 2.0 * suffix[j]);
    };

    AbsorbingEstimate est;
    est.quad_horizon = horizon;
    est.c1 = p.c1();
    est.delta = delta;
    est.c2 = cutoff_c2(p.rho);
    est.tail = integrand(0);
    if (!(est.tail < 1e-12))
        throw grid_error("absorbing_radius: integrand at the horizon is " +
                         std::to_string(est.tail) + " >= 1e-12; enlarge quad_horizon");

    double acc = 0.0;
    double prev = est.tail;
    for (std::size_t j = 1; j <= n; ++j) {
        const double cur = integrand(j);
        acc += 0.5 * dt * (prev + cur);
        prev = cur;
    }
    est.R2 = 1.0 + est.c1 * (norm2(p.h) + norm2(p.g)) * acc;
    return est;
}

// sum_{|i| > N} (U_i^2 + V_i^2)
inline double tail_mass(const StateE& s, int N) {
    if (N >= s.radius()) throw grid_error("tail_mass: need N < I");
    double m = 0.0;
    for (int i = N + 1; i <= s.radius(); ++i)
        m += s.U.at(i) * s.U.at(i) + s.V.at(i) * s.V.at(i) + s.U.at(-i) * s.U.at(-i) +
             s.V.at(-i) * s.V.at(-i);
    return m;
}

// sum_i rho(|i|/N) (U_i^2 + V_i^2); dominates tail_mass(., 2N)
inline double cutoff_mass(const StateE& s, int N) {
    if (N >= s.radius()) throw grid_error("cutoff_mass: need N < I");
    double m = 0.0;
    for (int i = -s.radius(); i <= s.radius(); ++i)
        m += cutoff_rho(std::abs(static_cast<double>(i)) / static_cast<double>(N)) *
             (s.U.at(i) * s.U.at(i) + s.V.at(i) * s.V.at(i));
    return m;
}

namespace detail {

// uniform direction on the unit sphere of E
inline StateE random_direction(int I, Rng& rng) {
    StateE s(I);
    double n2 = 0.0;
    for (double& x : s.U.v) {
        x = rng.gaussian();
        n2 += x * x;
    }
    for (double& x : s.V.v) {
        x = rng.gaussian();
        n2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(n2);
    s.U *= inv;
    s.V *= inv;
    return s;
}

} // namespace detail

// One tested (t, direction) of the pullback absorption experiment
struct AbsorptionRecord {
    double t = 0.0;
    std::size_t dir = 0;
    double terminal_energy = 0.0; // ||.||_E^2 at time 0
    double R2 = 0.0;
    bool absorbed = false;
    bool blowup = false;
};

struct AbsorptionReport {
    std::vector<AbsorptionRecord> records;
    double R2 = 0.0;
    double t_B = -1.0; // first grid t after which every direction is absorbed; -1 if none
    std::size_t blowups = 0;
};

// For each t in t_grid, integrate phi(t, theta_{-t} omega, e^{-xi(theta_{-t}
// omega)} Psi0) for Psi0 on the sphere of radius B_radius and compare the
// terminal norm against R^2(omega).
inline AbsorptionReport pullback_absorption(const SystemParams& p, const StablePath& path,
                                            double B_radius, const std::vector<double>& t_grid,
                                            std::size_t m_dirs, double trunc_T, double horizon,
                                            int refine = 1, std::uint64_t dir_seed = 1) {
    if (t_grid.empty()) throw data_error("pullback_absorption: empty t-grid");
    const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
    const OUSeries ou = make_ou_series(path, p.epsilons, trunc_T,
                                       -t_max - horizon, 0.0);
    AbsorptionReport rep;
    rep.R2 = absorbing_radius(ou, p, 0.0, horizon).R2;

    Rng rng(derive_seed(dir_seed, 0xab50));
    std::vector<StateE> dirs;
    dirs.reserve(m_dirs);
    for (std::size_t d = 0; d < m_dirs; ++d) dirs.push_back(detail::random_direction(p.I, rng));

    for (double t : t_grid) {
        const double xi0 = ou.xi[ou.index_of(-t)];
        const double scale = B_radius * lambda_inverse(xi0);
        for (std::size_t d = 0; d < m_dirs; ++d) {
            AbsorptionRecord rec;
            rec.t = t;
            rec.dir = d;
            rec.R2 = rep.R2;
            StateE psi0 = dirs[d];
            psi0.U *= scale;
            psi0.V *= scale;
            try {
                const Trajectory traj = integrate_transformed(p, ou, -t, psi0, t, refine,
                                                              "absorb", path.seed);
                rec.terminal_energy = norm2(traj.states.back());
                rec.absorbed = rec.terminal_energy <= rep.R2 * (1.0 + 1e-9);
            } catch (const diagnostic_error&) {
                rec.blowup = true;
                ++rep.blowups;
            }
            rep.records.push_back(rec);
        }
    }

    // first grid t after which every non-blow-up direction stays absorbed
    std::vector<double> sorted_t = t_grid;
    std::sort(sorted_t.begin(), sorted_t.end());
    for (double t : sorted_t) {
        bool all = true;
        for (const AbsorptionRecord& r : rep.records)
            if (r.t >= t && !r.blowup && !r.absorbed) all = false;
        if (all) {
            rep.t_B = t;
            break;
        }
    }
    return rep;
}

// e^{-gamma t} R^2(theta_{-t} omega) on a uniform t-grid
// max_horizon (default: = horizon) bounds an adaptive retry: a deep negative
// xi excursion near the base horizon can leave the radius quadrature
// unconverged there, in which case the horizon is doubled for that pullback
// time until the tail clears or the cap is reached.
inline TemperednessReport temperedness_of_K(const SystemParams& p, const StablePath& path,
                                            double gamma, double t_max, double t_step,
                                            double trunc_T, double horizon,
                                            double max_horizon = 0.0) {
    if (max_horizon <= 0.0) max_horizon = horizon;
    if (max_horizon < horizon)
        throw param_error("temperedness_of_K: max_horizon must be >= horizon");
    const OUSeries ou = make_ou_series(path, p.epsilons, trunc_T, -t_max - max_horizon, 0.0);
    std::vector<double> t_grid, r;
    for (double t = 0.0; t <= t_max + 1e-9; t += t_step) {
        t_grid.push_back(t);
        double h = horizon;
        for (;;) {
            try {
                r.push_back(absorbing_radius(ou, p, -t, h).R2);
                break;
            } catch (const grid_error&) {
                if (h >= max_horizon) throw;
                h = std::min(2.0 * h, max_horizon);
            }
        }
    }
    return temperedness_stat(t_grid, r, gamma);
}

// Tail-mass table of the pullback ensemble over (t, N)
struct NullnessCell {
    double t = 0.0;
    int N = 0;
    double max_tail = 0.0; // max over the tested ensemble of tail_mass(., 2N)
};

struct NullnessReport {
    std::vector<NullnessCell> table;
    bool found = false;
    double T_tilde = 0.0;
    int N_tilde = 0;
    double achieved_min = 0.0; // smallest max-tail seen, reported on failure
    std::size_t blowups = 0;
};

// Starting from points of K(theta_{-t} omega), tabulate tail_mass(phi, 2N)
// over t_grid x N_grid and locate the smallest (T, N) with tail mass <= eps^2
// uniformly over the ensemble for every tested t' >= T.
inline NullnessReport asymptotic_null_experiment(const SystemParams& p, const StablePath& path,
                                                 const std::vector<double>& t_grid,
                                                 const std::vector<int>& N_grid, double eps,
                                                 std::size_t m_points, double trunc_T,
                                                 double horizon, int refine = 1,
                                                 std::uint64_t point_seed = 1) {
    if (t_grid.empty() || N_grid.empty())
        throw data_error("asymptotic_null_experiment: empty grid");
    for (int N : N_grid)
        if (2 * N >= p.I)
            throw grid_error("asymptotic_null_experiment: need 2N < I for every N (N=" +
                             std::to_string(N) + ", I=" + std::to_string(p.I) + ")");
    const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
    const OUSeries ou = make_ou_series(path, p.epsilons, trunc_T, -t_max - horizon, 0.0);

    NullnessReport rep;
    Rng rng(derive_seed(point_seed, 0x7a115));
    std::vector<double> sorted_t = t_grid;
    std::sort(sorted_t.begin(), sorted_t.end());

    std::vector<std::vector<double>> max_tail(sorted_t.size(),
                                              std::vector<double>(N_grid.size(), 0.0));
    for (std::size_t ti = 0; ti < sorted_t.size(); ++ti) {
        const double t = sorted_t[ti];
        const double R = std::sqrt(absorbing_radius(ou, p, -t, horizon).R2);
        const double xi0 = ou.xi[ou.index_of(-t)];
        for (std::size_t m = 0; m < m_points; ++m) {
            StateE psi0 = detail::random_direction(p.I, rng);
            const double r = rng.uniform() * R * lambda_inverse(xi0);
            psi0.U *= r;
            psi0.V *= r;
            try {
                const Trajectory traj = integrate_transformed(p, ou, -t, psi0, t, refine,
                                                              "tails", path.seed);
                for (std::size_t ni = 0; ni < N_grid.size(); ++ni)
                    max_tail[ti][ni] = std::max(max_tail[ti][ni],
                                                tail_mass(traj.states.back(), 2 * N_grid[ni]));
            } catch (const diagnostic_error&) {
                ++rep.blowups;
            }
        }
        for (std::size_t ni = 0; ni < N_grid.size(); ++ni)
            rep.table.push_back({t, N_grid[ni], max_tail[ti][ni]});
    }

    rep.achieved_min = std::numeric_limits<double>::infinity();
    for (const NullnessCell& c : rep.table) rep.achieved_min = std::min(rep.achieved_min, c.max_tail);

    const double target = eps * eps;
    for (std::size_t ti = 0; ti < sorted_t.size() && !rep.found; ++ti) {
        for (std::size_t ni = 0; ni < N_grid.size(); ++ni) {
            bool uniform = true;
            for (std::size_t tj = ti; tj < sorted_t.size(); ++tj)
                if (max_tail[tj][ni] > target) uniform = false;
            if (uniform) {
                rep.found = true;
                rep.T_tilde = sorted_t[ti];
                rep.N_tilde = N_grid[ni];
                break;
            }
        }
    }
    return rep;
}

// Terminal point cloud of an ensemble pushed through the pullback map
struct AttractorCloud {
    double t_pullback = 0.0;
    std::vector<StateE> points;
    std::uint64_t seed = 0;
    double R2 = 0.0; // R^2(omega), the containment radius at the fiber
    std::size_t blowups = 0;
};

// Sample m_points uniformly in the ball K(theta_{-t} omega) (uniform
// direction, uniform-in-[0,R] radius) and push each forward by
// phi(t_pullback, theta_{-t} omega, .).
inline AttractorCloud attractor_cloud(const SystemParams& p, const StablePath& path,
                                      double t_pullback, std::size_t m_points, double trunc_T,
                                      double horizon, int refine = 1,
                                      std::uint64_t point_seed = 1) {
    if (m_points < 1) throw param_error("attractor_cloud: m_points must be >= 1");
    const OUSeries ou = make_ou_series(path, p.epsilons, trunc_T, -t_pullback - horizon, 0.0);
    AttractorCloud cloud;
    cloud.t_pullback = t_pullback;
    cloud.seed = path.seed;
    cloud.R2 = absorbing_radius(ou, p, 0.0, horizon).R2;
    const double R = std::sqrt(absorbing_radius(ou, p, -t_pullback, horizon).R2);

    Rng rng(derive_seed(point_seed, 0xc1dd));
    for (std::size_t m = 0; m < m_points; ++m) {
        StateE psi0 = detail::random_direction(p.I, rng);
        const double r = rng.uniform() * R;
        psi0.U *= r;
        psi0.V *= r;
        try {
            const Trajectory traj = integrate_transformed(p, ou, -t_pullback, psi0, t_pullback,
                                                          refine, "attractor", path.seed);
            cloud.points.push_back(traj.states.back());
        } catch (const diagnostic_error&) {
            ++cloud.blowups;
        }
    }
    return cloud;
}

// d(X, Y) = sup_{x in X} inf_{y in Y} ||x - y||_E by exhaustive pairing
inline double hausdorff_semidist(const std::vector<StateE>& X, const std::vector<StateE>& Y) {
    if (X.empty() || Y.empty()) throw data_error("hausdorff_semidist: empty point set");
    double sup = 0.0;
    for (const StateE& x : X) {
        double inf = std::numeric_limits<double>::infinity();
        for (const StateE& y : Y) inf = std::min(inf, dist2(x, y));
        sup = std::max(sup, inf);
    }
    return std::sqrt(sup);
}

inline double cloud_diameter(const std::vector<StateE>& X) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i)
        for (std::size_t j = i + 1; j < X.size(); ++j) d2 = std::max(d2, dist2(X[i], X[j]));
    return std::sqrt(d2);
}

} // namespace fhn
