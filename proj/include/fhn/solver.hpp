#pragma once

#include <cstdio>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "fhn/errors.hpp"
#include "fhn/lattice.hpp"
#include "fhn/ou.hpp"
#include "fhn/stable.hpp"

namespace fhn {

inline constexpr double kBlowupEnergy = 1e12;

// Computed solution of the transformed system on a uniform grid
struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<StateE> states;
    std::vector<double> xi_node;  // xi frozen at each node's cell (cadlag)
    std::vector<double> energy;   // E_rho at each node
    std::string tag;
    std::uint64_t seed = 0;

    std::size_t n_nodes() const { return states.size(); }
    double time_at(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
};

// Right side of the transformed random ODE at a frozen xi:
//   dU/dt = -AU - (lambda - xi) U + f_sign e^{-xi} f(e^{xi} U) - V + e^{-xi} h
//   dV/dt = rho U - (varpi - xi) V + e^{-xi} g
inline StateE drift_transformed(const StateE& psi, double xi, const SystemParams& p) {
    const double eminus = lambda_inverse(xi);
    const double e2 = lambda_factor(xi) * lambda_factor(xi); // e^{-xi} (e^{xi} u)^3 = e^{2xi} u^3
    StateE d(psi.radius());
    const LatticeVector au = op_A(psi.U);
    for (std::size_t k = 0; k < psi.U.v.size(); ++k) {
        const double u = psi.U.v[k];
        d.U.v[k] = -au.v[k] - (p.lambda - xi) * u + p.f_sign * p.kappa * e2 * u * u * u -
                   psi.V.v[k] + eminus * p.h.v[k];
        d.V.v[k] = p.rho * u - (p.varpi - xi) * psi.V.v[k] + eminus * p.g.v[k];
    }
    return d;
}

namespace detail {

inline double max_site_sq(const LatticeVector& u) {
    double m = 0.0;
    for (double x : u.v) m = std::max(m, x * x);
    return m;
}

inline void axpy(StateE& y, double a, const StateE& x) {
    for (std::size_t k = 0; k < y.U.v.size(); ++k) {
        y.U.v[k] += a * x.U.v[k];
        y.V.v[k] += a * x.V.v[k];
    }
}

template <class DriftFn>
inline StateE rk4_step(const StateE& psi, double dt, DriftFn&& drift) {
    const StateE k1 = drift(psi);
    StateE s = psi;
    axpy(s, dt / 2.0, k1);
    const StateE k2 = drift(s);
    s = psi;
    axpy(s, dt / 2.0, k2);
    const StateE k3 = drift(s);
    s = psi;
    axpy(s, dt, k3);
    const StateE k4 = drift(s);
    s = psi;
    axpy(s, dt / 6.0, k1);
    axpy(s, dt / 3.0, k2);
    axpy(s, dt / 3.0, k3);
    axpy(s, dt / 6.0, k4);
    return s;
}

inline void check_stability(double dt, double lambda, double xi_abs, double kappa,
                            double max_u_sq, double exp_factor, const std::string& tag) {
    const double stiff = 4.0 + lambda + xi_abs + 3.0 * kappa * max_u_sq * exp_factor;
    if (dt * stiff >= 2.0)
        throw diagnostic_error("integrate: explicit stability bound violated (dt*" +
                               std::to_string(stiff) + " >= 2); suggested dt <= " +
                               std::to_string(1.0 / stiff) + " [" + tag + "]");
}

inline void check_energy(double e, double t, const std::string& tag, std::uint64_t seed) {
    if (!(e < kBlowupEnergy))
        throw diagnostic_error("integrate: energy " + std::to_string(e) + " at t=" +
                               std::to_string(t) + " exceeds blow-up threshold [" + tag +
                               ", seed " + std::to_string(seed) + "]");
}

} // namespace detail

// RK4 on the transformed system. xi is held at its left-node value within
// each OU-grid cell (cadlag convention); the solver step may refine the OU
// grid by an integer factor. An explicit stability bound is checked per cell.
inline Trajectory integrate_transformed(const SystemParams& p, const OUSeries& ou, double t0,
                                        const StateE& psi0, double T, int refine = 1,
                                        const std::string& tag = "transformed",
                                        std::uint64_t seed = 0) {
    p.validate();
    if (refine < 1) throw param_error("integrate_transformed: refine must be >= 1");
    const std::size_t k0 = ou.index_of(t0);
    const double cells_raw = T / ou.dt;
    const long long n_cells = std::llround(cells_raw);
    if (n_cells < 0 || std::abs(cells_raw - static_cast<double>(n_cells)) > 1e-9 * (1.0 + cells_raw))
        throw grid_error("integrate_transformed: T must be a multiple of the OU grid step");
    if (k0 + static_cast<std::size_t>(n_cells) > ou.n_nodes() - 1)
        throw grid_error("integrate_transformed: OU series does not cover [t0, t0+T]");

    const double dt = ou.dt / static_cast<double>(refine);
    Trajectory traj;
    traj.t0 = t0;
    traj.dt = dt;
    traj.tag = tag;
    traj.seed = seed;
    traj.states.reserve(static_cast<std::size_t>(n_cells) * refine + 1);

    StateE psi = psi0;
    auto push = [&](const StateE& s, double xi, double t) {
        const double e = energy(s, p.rho);
        detail::check_energy(e, t, tag, seed);
        traj.states.push_back(s);
        traj.xi_node.push_back(xi);
        traj.energy.push_back(e);
    };
    push(psi, ou.xi[k0], t0);

    for (long long cell = 0; cell < n_cells; ++cell) {
        const double xi = ou.xi[k0 + static_cast<std::size_t>(cell)];
        // the cubic term scales with e^{2 xi}, matching the drift
        detail::check_stability(dt, p.lambda, std::abs(xi), p.kappa,
                                detail::max_site_sq(psi.U), std::exp(2.0 * xi), tag);
        auto drift = [&](const StateE& s) { return drift_transformed(s, xi, p); };
        for (int m = 0; m < refine; ++m) {
            psi = detail::rk4_step(psi, dt, drift);
            const bool at_cell_end = (m == refine - 1);
            const std::size_t next = k0 + static_cast<std::size_t>(cell) + 1;
            const double xi_here = at_cell_end ? ou.xi[next] : xi;
            push(psi, xi_here, traj.time_at(traj.states.size()));
        }
    }
    return traj;
}

// psi(t) = e^{xi(theta_t omega)} phi(t): scale every node by its cell factor
inline Trajectory map_to_original(const Trajectory& traj, const OUSeries& ou) {
    (void)ou; // grid alignment was fixed at integration time via xi_node
    Trajectory out = traj;
    out.tag = traj.tag + ":original";
    for (std::size_t k = 0; k < traj.n_nodes(); ++k) {
        const double f = lambda_factor(traj.xi_node[k]);
        out.states[k].U *= f;
        out.states[k].V *= f;
        out.energy[k] = f * f * traj.energy[k];
    }
    return out;
}

// Jump-adapted splitting for the original Marcus-form system: one RK4 substep
// of the deterministic drift per path cell, then the exact Marcus factor
// exp(sum_j eps_j dL_j) applied to both components (linear noise integrates
// to exactly this exponential across a jump).
inline Trajectory integrate_marcus_direct(const SystemParams& p, const StablePath& path,
                                          double t0, const StateE& psi0, double T,
                                          const std::string& tag = "marcus",
                                          std::uint64_t seed = 0) {
    p.validate();
    if (path.channels != p.epsilons.size())
        throw data_error("integrate_marcus_direct: path channels and epsilons must match");
    const std::size_t k0 = path.index_of(t0);
    const double cells_raw = T / path.dt;
    const long long n_cells = std::llround(cells_raw);
    if (std::abs(cells_raw - static_cast<double>(n_cells)) > 1e-9 * (1.0 + cells_raw))
        throw grid_error("integrate_marcus_direct: T must be a multiple of the path grid step");
    if (k0 + static_cast<std::size_t>(n_cells) > path.n_nodes() - 1)
        throw grid_error("integrate_marcus_direct: path does not cover [t0, t0+T]");

    const double dt = path.dt;
    Trajectory traj;
    traj.t0 = t0;
    traj.dt = dt;
    traj.tag = tag;
    traj.seed = seed;

    auto drift = [&](const StateE& s) {
        StateE d(s.radius());
        const LatticeVector au = op_A(s.U);
        for (std::size_t k = 0; k < s.U.v.size(); ++k) {
            const double u = s.U.v[k];
            d.U.v[k] = -au.v[k] - p.lambda * u + p.f_sign * p.kappa * u * u * u - s.V.v[k] +
                       p.h.v[k];
            d.V.v[k] = p.rho * u - p.varpi * s.V.v[k] + p.g.v[k];
        }
        return d;
    };

    StateE psi = psi0;
    auto push = [&](const StateE& s, double t) {
        const double e = energy(s, p.rho);
        detail::check_energy(e, t, tag, seed);
        traj.states.push_back(s);
        traj.xi_node.push_back(0.0);
        traj.energy.push_back(e);
    };
    push(psi, t0);

    for (long long cell = 0; cell < n_cells; ++cell) {
        detail::check_stability(dt, p.lambda, 0.0, p.kappa, detail::max_site_sq(psi.U), 1.0, tag);
        psi = detail::rk4_step(psi, dt, drift);
        double jump = 0.0;
        const std::size_t k = k0 + static_cast<std::size_t>(cell);
        for (std::size_t c = 0; c < path.channels; ++c)
            jump += p.epsilons[c] * (path.value(c, k + 1) - path.value(c, k));
        const double factor = lambda_factor(jump);
        psi.U *= factor;
        psi.V *= factor;
        push(psi, traj.time_at(traj.states.size()));
    }
    return traj;
}

// a(omega) = 2 int_0^T |xi| ds and the max-over-[0,T] bound from the global
// existence estimate, both by trapezoid on the OU grid.
struct GrowthBounds {
    double a = 0.0;
    double b = 0.0;
};

inline GrowthBounds growth_bounds(const OUSeries& ou, const SystemParams& p, double t0, double T) {
    const std::size_t k0 = ou.index_of(t0);
    const std::size_t kT = ou.index_of(t0 + T);
    const double dt = ou.dt;
    const double delta = p.delta();
    const double force = norm2(p.h) + norm2(p.g);

    GrowthBounds gb;
    // cumulative trapezoids of |xi| and xi from t0
    std::vector<double> cum_xi(kT - k0 + 1, 0.0);
    double cum_abs = 0.0;
    for (std::size_t k = k0; k < kT; ++k) {
        cum_abs += 0.5 * dt * (std::abs(ou.xi[k]) + std::abs(ou.xi[k + 1]));
        cum_xi[k - k0 + 1] = cum_xi[k - k0] + 0.5 * dt * (ou.xi[k] + ou.xi[k + 1]);
    }
    gb.a = 2.0 * cum_abs;

    double inner_int = 0.0; // int_0^t e^{-2xi(s) + delta s - 2 int_0^s xi} ds
    auto integrand = [&](std::size_t rel) {
        const double t = dt * static_cast<double>(rel);
        return std::exp(-2.0 * ou.xi[k0 + rel] + delta * t - 2.0 * cum_xi[rel]);
    };
    double prev = integrand(0);
    gb.b = 0.0;
    for (std::size_t rel = 1; rel <= kT - k0; ++rel) {
        const double cur = integrand(rel);
        inner_int += 0.5 * dt * (prev + cur);
        prev = cur;
        const double t = dt * static_cast<double>(rel);
        const double env = p.c1() * force * std::exp(-delta * t + 2.0 * cum_xi[rel]) * inner_int;
        gb.b = std::max(gb.b, env);
    }
    return gb;
}

// max over nodes of ||Psi(t)||^2 - (||Psi0||^2 e^a + b); <= 0 when the
// global existence bound holds along the run
inline double growth_bound_violation(const Trajectory& traj, const GrowthBounds& gb) {
    const double base = norm2(traj.states.front()) * std::exp(gb.a) + gb.b;
    double worst = -base;
    for (const StateE& s : traj.states) worst = std::max(worst, norm2(s) - base);
    return worst;
}

// Discrete check of the dissipative energy estimate: max over steps of the
// positive part of (E(t+dt) - E(t))/dt - [-(delta - 2xi)E + (1/delta)(||h||^2
// + (1/rho)||g||^2) e^{-2xi}]. O(dt) under refinement.
inline double energy_estimate_residual(const Trajectory& traj, const SystemParams& p) {
    const double delta = p.delta();
    const double force = (norm2(p.h) + norm2(p.g) / p.rho) / delta;
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < traj.n_nodes(); ++k) {
        const double xi = traj.xi_node[k];
        const double rhs = -(delta - 2.0 * xi) * traj.energy[k] + force * std::exp(-2.0 * xi);
        const double lhs = (traj.energy[k + 1] - traj.energy[k]) / traj.dt;
        worst = std::max(worst, lhs - rhs);
    }
    return worst;
}

// Continuous-dependence check against the e^{kappa T} modulus
struct ContinuityReport {
    double ratio = 0.0;   // sup_t ||Phi - Psi||^2 / ||Phi0 - Psi0||^2
    double bound = 0.0;   // e^{kappa T}
    double kappa = 0.0;
    bool ok = false;
};

inline ContinuityReport continuity_modulus(const SystemParams& p, const OUSeries& ou, double t0,
                                           const StateE& psi0, const StateE& phi0, double T,
                                           int refine = 1) {
    const double d0 = dist2(phi0, psi0);
    if (!(d0 > 0.0)) throw param_error("continuity_modulus: initial states must differ");
    const Trajectory a = integrate_transformed(p, ou, t0, psi0, T, refine, "continuity:psi");
    const Trajectory b = integrate_transformed(p, ou, t0, phi0, T, refine, "continuity:phi");

    double sup = 0.0, xi_max = 0.0, r2 = 0.0;
    for (std::size_t k = 0; k < a.n_nodes(); ++k) {
        sup = std::max(sup, dist2(a.states[k], b.states[k]));
        xi_max = std::max(xi_max, std::abs(a.xi_node[k]));
        r2 = std::max({r2, detail::max_site_sq(a.states[k].U), detail::max_site_sq(b.states[k].U)});
    }
    ContinuityReport rep;
    const double lip = 3.0 * p.kappa * r2 * std::exp(2.0 * xi_max);
    rep.kappa = 2.0 * (lip + xi_max);
    rep.bound = std::exp(rep.kappa * T);
    rep.ratio = sup / d0;
    rep.ok = rep.ratio <= rep.bound * (1.0 + 1e-9);
    return rep;
}

// CSV dump: `t,E,norm2_U,norm2_V`
inline void dump_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    os << "t,E,norm2_U,norm2_V\n";
    char buf[128];
    for (std::size_t k = 0; k < traj.n_nodes(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", traj.time_at(k),
                      traj.energy[k], norm2(traj.states[k].U), norm2(traj.states[k].V));
        os << buf << '\n';
    }
}

// full-state CSV: `t,i,U_i,V_i`
inline void dump_trajectory_states_csv(const Trajectory& traj, std::ostream& os) {
    os << "t,i,U_i,V_i\n";
    char buf[128];
    for (std::size_t k = 0; k < traj.n_nodes(); ++k) {
        const StateE& s = traj.states[k];
        for (int i = -s.radius(); i <= s.radius(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g,%d,%.17g,%.17g", traj.time_at(k), i,
                          s.U.at(i), s.V.at(i));
            os << buf << '\n';
        }
    }
}

} // namespace fhn
