#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fhn/attractor.hpp"
#include "oracles.hpp"

using namespace fhn;

namespace {

OUSeries zero_ou(double t_start, double dt, double t_end) {
    const std::size_t cells = static_cast<std::size_t>(std::llround((t_end - t_start) / dt));
    OUSeries ou;
    ou.t_start = t_start;
    ou.dt = dt;
    ou.xi.assign(cells + 1, 0.0);
    return ou;
}

StablePath flat_path(double t_start, double dt, double t_end, std::size_t channels = 1) {
    const std::size_t cells = static_cast<std::size_t>(std::llround((t_end - t_start) / dt));
    std::vector<std::vector<double>> inc(channels, std::vector<double>(cells, 0.0));
    return StablePath::from_increments(t_start, dt, inc);
}

} // namespace

TEST_CASE("cutoff shape") {
    CHECK(cutoff_rho(0.5) == 0.0);
    CHECK(cutoff_rho(1.0) == 0.0);
    CHECK(cutoff_rho(2.0) == 1.0);
    CHECK(cutoff_rho(3.0) == 1.0);
    CHECK(cutoff_rho(1.5) == 0.5);

    // monotone on [1,2]; max |rho'| = 3/2 by dense finite differences
    double prev = 0.0, max_slope = 0.0;
    const int n = 20000;
    for (int k = 1; k <= n; ++k) {
        const double s = 1.0 + static_cast<double>(k) / n;
        const double v = cutoff_rho(s);
        CHECK(v >= prev);
        max_slope = std::max(max_slope, (v - prev) * n);
        prev = v;
    }
    CHECK(max_slope <= kCutoffC0 + 1e-3);
    CHECK(max_slope >= kCutoffC0 - 1e-3);

    CHECK(cutoff_c2(1.0) == 6.0);
    CHECK(cutoff_c2(4.0) == 24.0);  // 4 c0 / min{1, 1/4}
}

TEST_CASE("absorbing radius") {
    SystemParams p;
    p.I = 16;
    p.h = exp_profile(p.I, 1.0, 8.0);
    p.g = exp_profile(p.I, 1.0, 8.0);

    SUBCASE("zero forcing gives exactly 1") {
        SystemParams q = p;
        q.h = LatticeVector(q.I);
        q.g = LatticeVector(q.I);
        const OUSeries ou = zero_ou(-60.0, 0.01, 0.0);
        CHECK(absorbing_radius(ou, q, 0.0, 50.0).R2 == 1.0);
    }
    SUBCASE("flat xi matches the closed form") {
        // the quadrature is second order with error ~ 0.08 * dt^2 here, so
        // dt = 2.5e-4 is needed to land below 1e-8 relative
        const double H = 50.0;
        const OUSeries ou = zero_ou(-60.0, 2.5e-4, 0.0);
        const AbsorbingEstimate est = absorbing_radius(ou, p, 0.0, H);
        const double delta = p.delta();
        const double exact =
            1.0 + p.c1() * (norm2(p.h) + norm2(p.g)) * (1.0 - std::exp(-delta * H)) / delta;
        CHECK(est.R2 == doctest::Approx(exact).epsilon(1e-8));
        CHECK(est.c2 == cutoff_c2(p.rho));
    }
    SUBCASE("doubling the horizon moves a converged estimate by < 1e-9") {
        StableParams sp{1.5, 0.0, 1.0, 0.0};
        const StablePath path = gen_path(sp, 1, -130.0, 0.0, 0.01, 3);
        const OUSeries ou = make_ou_series(path, {0.2}, 40.0, -85.0, 0.0);
        const double r40 = absorbing_radius(ou, p, 0.0, 40.0).R2;
        const double r80 = absorbing_radius(ou, p, 0.0, 80.0).R2;
        CHECK(std::abs(r80 - r40) < 1e-9 * r40);
    }
    SUBCASE("unconverged tail is rejected with the measured size") {
        const OUSeries ou = zero_ou(-20.0, 0.01, 0.0);
        CHECK_THROWS_AS(absorbing_radius(ou, p, 0.0, 15.0), grid_error);
    }
}

TEST_CASE("tail and cutoff masses") {
    const int I = 32;

    SUBCASE("support inside the window gives zero tail") {
        StateE s(I);
        s.U.at(3) = 1.0;
        s.V.at(-2) = 2.0;
        CHECK(tail_mass(s, 4) == 0.0);
        CHECK(tail_mass(s, 1) == 5.0);  // whole mass once N is below the support
    }
    SUBCASE("unit mass exactly beyond twice the cutoff radius") {
        const int N = 5;
        StateE s(I);
        s.U.at(2 * N + 1) = 1.0;
        CHECK(tail_mass(s, N) == 1.0);
        CHECK(cutoff_mass(s, N) == 1.0);
    }
    SUBCASE("cutoff mass dominates the 2N tail and is dominated by the N tail") {
        Rng rng(77);
        for (int trial = 0; trial < 100; ++trial) {
            StateE s(I);
            for (double& x : s.U.v) x = rng.gaussian();
            for (double& x : s.V.v) x = rng.gaussian();
            const int N = 6;
            CHECK(tail_mass(s, 2 * N) <= cutoff_mass(s, N) + 1e-15);
            CHECK(cutoff_mass(s, N) <= tail_mass(s, N) + 1e-15);
        }
    }
    SUBCASE("tail mass is non-increasing in N") {
        Rng rng(78);
        StateE s(I);
        for (double& x : s.U.v) x = rng.gaussian();
        for (double& x : s.V.v) x = rng.gaussian();
        for (int N = 1; N + 1 < I; ++N) CHECK(tail_mass(s, N + 1) <= tail_mass(s, N));
    }
    SUBCASE("window errors") {
        StateE s(I);
        CHECK_THROWS_AS(tail_mass(s, I), grid_error);
        CHECK_THROWS_AS(cutoff_mass(s, I + 1), grid_error);
    }
}

TEST_CASE("hausdorff semi-distance") {
    const int I = 4;
    StateE zero(I);
    StateE e0(I);
    e0.U = LatticeVector::basis(I, 0);

    SUBCASE("identical sets") {
        const std::vector<StateE> X{zero, e0};
        CHECK(hausdorff_semidist(X, X) == 0.0);
    }
    SUBCASE("singleton pair") {
        CHECK(hausdorff_semidist({zero}, {e0}) == 1.0);
    }
    SUBCASE("subset gives zero; asymmetry shows the semi-metric") {
        StateE far(I);
        far.U = LatticeVector::constant(I, 10.0);
        const std::vector<StateE> X{zero, e0};
        const std::vector<StateE> Y{zero, e0, far};
        CHECK(hausdorff_semidist(X, Y) == 0.0);
        CHECK(hausdorff_semidist(Y, X) > 1.0);
    }
    SUBCASE("empty sets rejected") {
        CHECK_THROWS_AS(hausdorff_semidist({}, {zero}), data_error);
    }
}

TEST_CASE("pullback absorption fixtures") {
    SUBCASE("zero ball with zero forcing is absorbed immediately") {
        SystemParams p;
        p.I = 8;
        p.kappa = 0.0;
        p.epsilons = {0.0};
        p.h = LatticeVector(p.I);
        p.g = LatticeVector(p.I);
        const StablePath path = flat_path(-150.0, 0.01, 0.0);
        const AbsorptionReport rep =
            pullback_absorption(p, path, 0.0, {0.0, 1.0}, 3, 40.0, 60.0);
        CHECK(rep.R2 == 1.0);
        CHECK(rep.t_B == 0.0);
        for (const AbsorptionRecord& r : rep.records) {
            CHECK(r.absorbed);
            CHECK(r.terminal_energy == 0.0);
        }
    }
    SUBCASE("deterministic absorption obeys the decay envelope") {
        SystemParams p;
        p.I = 8;
        p.epsilons = {0.0};
        p.h = exp_profile(p.I, 1.0, 8.0);
        p.g = exp_profile(p.I, 1.0, 8.0);
        const StablePath path = flat_path(-150.0, 0.01, 0.0);
        const double B = 5.0;
        const std::vector<double> t_grid{1.0, 2.0, 5.0, 10.0, 20.0};
        const AbsorptionReport rep = pullback_absorption(p, path, B, t_grid, 4, 40.0, 60.0);
        CHECK(rep.blowups == 0);
        CHECK(rep.t_B >= 0.0);
        const double c = std::max(1.0, 1.0 / p.rho) / std::min(1.0, 1.0 / p.rho);
        for (const AbsorptionRecord& r : rep.records) {
            // Gronwall: E-norm^2 <= c e^{-delta t} B^2 + (R^2 - 1), with the
            // norm-equivalence constant c between the E-norm and the energy
            const double envelope = c * std::exp(-p.delta() * r.t) * B * B + (rep.R2 - 1.0);
            CHECK(r.terminal_energy <= envelope * (1.0 + 1e-6));
        }
    }
}

TEST_CASE("temperedness of the absorbing set, noise-free") {
    SystemParams p;
    p.I = 8;
    p.epsilons = {0.0};
    p.h = exp_profile(p.I, 1.0, 8.0);
    p.g = exp_profile(p.I, 1.0, 8.0);
    const StablePath path = flat_path(-310.0, 0.05, 0.0);
    const TemperednessReport rep = temperedness_of_K(p, path, 0.1, 200.0, 5.0, 40.0, 60.0);
    CHECK(rep.decays);
    // R^2 is constant without noise, so the decay is exactly e^{-gamma t}
    CHECK(rep.scaled.back() ==
          doctest::Approx(rep.scaled.front() * std::exp(-0.1 * 200.0)).epsilon(1e-9));
}

TEST_CASE("asymptotic nullness against the linear fixed point") {
    // Noise-free linear system with forcing supported in |i| <= 4: the
    // pullback limit is the fixed point, whose tail beyond N = 8 is tiny.
    SystemParams p;
    p.I = 32;
    p.kappa = 0.0;
    p.epsilons = {0.0};
    p.h = LatticeVector(p.I);
    for (int i = -4; i <= 4; ++i) p.h.at(i) = 0.5;
    p.g = LatticeVector(p.I);

    const StateE fixed = oracle::linear_fixed_point(p);
    CHECK(tail_mass(fixed, 8) < 1e-6);

    const StablePath path = flat_path(-150.0, 0.01, 0.0);
    const NullnessReport rep = asymptotic_null_experiment(p, path, {5.0, 10.0, 20.0, 40.0},
                                                          {4, 8, 12}, 1e-2, 4, 40.0, 60.0);
    CHECK(rep.blowups == 0);
    CHECK(rep.found);
    CHECK(rep.N_tilde <= 8);
    // tail mass is monotone non-increasing in N at each fixed t
    for (std::size_t a = 0; a < rep.table.size(); ++a)
        for (std::size_t b = a + 1; b < rep.table.size(); ++b)
            if (rep.table[a].t == rep.table[b].t && rep.table[a].N < rep.table[b].N)
                CHECK(rep.table[b].max_tail <= rep.table[a].max_tail * (1.0 + 1e-12));
    // grids violating 2N < I are rejected
    CHECK_THROWS_AS(
        asymptotic_null_experiment(p, path, {5.0}, {16}, 1e-2, 2, 40.0, 60.0), grid_error);
}

TEST_CASE("attractor cloud") {
    SUBCASE("one point, zero diameter") {
        SystemParams p;
        p.I = 8;
        p.epsilons = {0.0};
        p.h = exp_profile(p.I, 1.0, 8.0);
        p.g = exp_profile(p.I, 1.0, 8.0);
        const StablePath path = flat_path(-150.0, 0.01, 0.0);
        const AttractorCloud cloud = attractor_cloud(p, path, 5.0, 1, 40.0, 60.0);
        CHECK(cloud.points.size() == 1);
        CHECK(cloud_diameter(cloud.points) == 0.0);
    }
    SUBCASE("noise-free linear clouds collapse onto the fixed point") {
        SystemParams p;
        p.I = 16;
        p.kappa = 0.0;
        p.epsilons = {0.0};
        p.h = exp_profile(p.I, 1.0, 8.0);
        p.g = exp_profile(p.I, 1.0, 8.0);
        const StablePath path = flat_path(-150.0, 0.01, 0.0);
        const AttractorCloud cloud = attractor_cloud(p, path, 40.0, 6, 40.0, 60.0);
        REQUIRE(cloud.points.size() == 6);
        const StateE fixed = oracle::linear_fixed_point(p);
        CHECK(cloud_diameter(cloud.points) < 1e-6);
        for (const StateE& pt : cloud.points) CHECK(std::sqrt(dist2(pt, fixed)) < 1e-6);
    }
}
