#pragma once

#include <cstdio>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "fhn/errors.hpp"

namespace fhn {

// Truncated l^2 sequence on the index window [-I, I]; entries outside the
// window are semantically 0 (Dirichlet truncation).
struct LatticeVector {
    int radius = 0;              // I
    std::vector<double> v;       // 2I+1 entries, index i stored at i + I

    LatticeVector() = default;
    explicit LatticeVector(int I) : radius(I), v(static_cast<std::size_t>(2 * I + 1), 0.0) {}

    static LatticeVector basis(int I, int i) {
        LatticeVector e(I);
        e.at(i) = 1.0;
        return e;
    }

    static LatticeVector constant(int I, double c) {
        LatticeVector u(I);
        std::fill(u.v.begin(), u.v.end(), c);
        return u;
    }

    double& at(int i) { return v[static_cast<std::size_t>(i + radius)]; }
    double at(int i) const { return v[static_cast<std::size_t>(i + radius)]; }

    // zero-extension beyond the window
    double get(int i) const { return (i < -radius || i > radius) ? 0.0 : at(i); }

    LatticeVector& operator+=(const LatticeVector& o) {
        require_same_window(o, "operator+=");
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += o.v[k];
        return *this;
    }
    LatticeVector& operator-=(const LatticeVector& o) {
        require_same_window(o, "operator-=");
        for (std::size_t k = 0; k < v.size(); ++k) v[k] -= o.v[k];
        return *this;
    }
    LatticeVector& operator*=(double c) {
        for (double& x : v) x *= c;
        return *this;
    }

    void require_same_window(const LatticeVector& o, const char* where) const {
        if (radius != o.radius)
            throw grid_error(std::string(where) + ": window mismatch (I=" +
                             std::to_string(radius) + " vs " + std::to_string(o.radius) + ")");
    }
};

inline LatticeVector operator+(LatticeVector a, const LatticeVector& b) { return a += b; }
inline LatticeVector operator-(LatticeVector a, const LatticeVector& b) { return a -= b; }
inline LatticeVector operator*(double c, LatticeVector a) { return a *= c; }

// Inner product under zero-extension: windows need not match, so operator
// identities like (B*u, w) = (u, Bw) hold across the widened outputs.
inline double inner(const LatticeVector& u, const LatticeVector& w) {
    const int I = std::min(u.radius, w.radius);
    double s = 0.0;
    for (int i = -I; i <= I; ++i) s += u.at(i) * w.at(i);
    return s;
}

inline double norm2(const LatticeVector& u) {
    double s = 0.0;
    for (double x : u.v) s += x * x;
    return s;
}

// restrict (or zero-extend) to the window [-I, I]
inline LatticeVector restrict_to(const LatticeVector& u, int I) {
    LatticeVector out(I);
    for (int i = -I; i <= I; ++i) out.at(i) = u.get(i);
    return out;
}

// (Au)_i = -u_{i-1} + 2u_i - u_{i+1}, output on the same window
inline LatticeVector op_A(const LatticeVector& u) {
    LatticeVector out(u.radius);
    for (int i = -u.radius; i <= u.radius; ++i)
        out.at(i) = -u.get(i - 1) + 2.0 * u.at(i) - u.get(i + 1);
    return out;
}

// (Bu)_i = u_{i+1} - u_i. The output window widens by one so that no edge
// cell is lost: (Au, u) = ||Bu||^2 and A = B*B hold exactly.
inline LatticeVector op_B(const LatticeVector& u) {
    LatticeVector out(u.radius + 1);
    for (int i = -u.radius - 1; i <= u.radius + 1; ++i) out.at(i) = u.get(i + 1) - u.get(i);
    return out;
}

// (B*u)_i = u_{i-1} - u_i, adjoint of B, output widened by one
inline LatticeVector op_Bstar(const LatticeVector& u) {
    LatticeVector out(u.radius + 1);
    for (int i = -u.radius - 1; i <= u.radius + 1; ++i) out.at(i) = u.get(i - 1) - u.get(i);
    return out;
}

// Nemytskii operator: componentwise f_i(x) = kappa x^3, so f_i(x) x >= 0
inline LatticeVector nemytskii_f(const LatticeVector& u, double kappa) {
    LatticeVector out(u.radius);
    for (std::size_t k = 0; k < u.v.size(); ++k) out.v[k] = kappa * u.v[k] * u.v[k] * u.v[k];
    return out;
}

// Product state Psi = (U, V) in E = l^2 x l^2
struct StateE {
    LatticeVector U, V;

    StateE() = default;
    explicit StateE(int I) : U(I), V(I) {}
    StateE(LatticeVector u, LatticeVector w) : U(std::move(u)), V(std::move(w)) {
        U.require_same_window(V, "StateE");
    }

    int radius() const { return U.radius; }
};

inline double norm2(const StateE& s) { return norm2(s.U) + norm2(s.V); }

// E_rho(Psi) = ||U||^2 + (1/rho) ||V||^2
inline double energy(const StateE& s, double rho) {
    s.U.require_same_window(s.V, "energy");
    return norm2(s.U) + norm2(s.V) / rho;
}

inline double dist2(const StateE& a, const StateE& b) {
    return norm2(a.U - b.U) + norm2(a.V - b.V);
}

// exponential forcing profile c e^{-|i|/decay}
inline LatticeVector exp_profile(int I, double amplitude, double decay) {
    LatticeVector u(I);
    for (int i = -I; i <= I; ++i)
        u.at(i) = amplitude * std::exp(-std::abs(static_cast<double>(i)) / decay);
    return u;
}

// All model constants in one place.
struct SystemParams {
    double lambda = 1.0;  // linear damping on u
    double rho = 1.0;     // varrho, coupling u -> v
    double varpi = 1.0;   // linear damping on v
    double kappa = 1.0;   // cubic nonlinearity coefficient
    double f_sign = -1.0; // drift carries f_sign * f(u); -1 is the dissipative reading
    int I = 64;           // lattice truncation radius
    double alpha = 1.5;   // stability index, (1,2) for the dynamics
    std::vector<double> epsilons{0.2};
    LatticeVector h, g;   // constant-in-time forcings

    SystemParams() : h(exp_profile(I, 1.0, 8.0)), g(exp_profile(I, 1.0, 8.0)) {}

    double delta() const { return std::min(lambda, varpi); }

    double c1() const {
        return std::max(1.0, 1.0 / rho) / (delta() * std::min(1.0, 1.0 / rho));
    }

    void validate() const {
        if (!(lambda > 0.0)) throw param_error("SystemParams: lambda must be > 0");
        if (!(rho > 0.0)) throw param_error("SystemParams: rho must be > 0");
        if (!(varpi > 0.0)) throw param_error("SystemParams: varpi must be > 0");
        if (!(kappa >= 0.0)) throw param_error("SystemParams: kappa must be >= 0");
        if (f_sign != 1.0 && f_sign != -1.0)
            throw param_error("SystemParams: f_sign must be +1 or -1");
        if (!(alpha > 1.0) || !(alpha < 2.0))
            throw param_error("SystemParams: alpha must lie in (1,2) for the dynamics");
        if (I < 1) throw param_error("SystemParams: I must be >= 1");
        if (h.radius != I || g.radius != I)
            throw grid_error("SystemParams: forcing windows must equal I");
    }
};

// CSV dump: `i,value`
inline void dump_lattice_csv(const LatticeVector& u, std::ostream& os) {
    os << "i,value\n";
    char buf[64];
    for (int i = -u.radius; i <= u.radius; ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g", i, u.at(i));
        os << buf << '\n';
    }
}

} // namespace fhn
