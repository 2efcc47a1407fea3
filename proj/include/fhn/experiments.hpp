#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fhn/attractor.hpp"
#include "fhn/config.hpp"
#include "fhn/errors.hpp"
#include "fhn/ou.hpp"
#include "fhn/solver.hpp"
#include "fhn/stable.hpp"

namespace fhn {

inline constexpr const char* kVersion = "0.1.0";

struct RunResult {
    bool pass = true;
    std::vector<std::string> failures;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            failures.push_back(what);
        }
    }
    void merge(const RunResult& o) {
        pass = pass && o.pass;
        failures.insert(failures.end(), o.failures.begin(), o.failures.end());
    }
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream os(dir / name);
    if (!os) throw config_error("cannot write to output file " + (dir / name).string());
    return os;
}

inline std::string g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) throw data_error("median of empty set");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

} // namespace detail

// Appends config hash, seed list, version and timing to `manifest`.
class Manifest {
public:
    Manifest(const ExperimentConfig& cfg, const std::filesystem::path& dir,
             const std::string& subcommand)
        : dir_(dir) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        os_.open(dir / "manifest");
        if (!os_) throw config_error("cannot write manifest in " + dir.string());
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(config_hash(cfg)));
        os_ << "version = fhn-lab " << kVersion << "\n"
            << "subcommand = " << subcommand << "\n"
            << "config_hash = " << buf << "\n"
            << "seeds = " << detail::fmt_list(cfg.seeds) << "\n";
    }

    void time(const std::string& name, std::chrono::steady_clock::time_point begin) {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - begin)
                            .count();
        os_ << "timing." << name << "_ms = " << ms << "\n";
    }

private:
    std::filesystem::path dir_;
    std::ofstream os_;
};

// --- noise-test -----------------------------------------------------------

inline RunResult run_noise_test(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    RunResult res;
    auto csv = detail::open_out(out, "noise.csv");
    csv << "stat,value\n";

    // alpha = 2 reduction: S_2(1,0,0) has variance 2
    {
        Rng rng(derive_seed(cfg.seeds.front(), 0x9a55));
        StableParams p{2.0, 0.0, 1.0, 0.0};
        const std::size_t n = 100000;
        double s = 0.0, s2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double x = sample_stable(p, rng);
            s += x;
            s2 += x * x;
        }
        const double mean = s / static_cast<double>(n);
        const double var = s2 / static_cast<double>(n) - mean * mean;
        csv << "gaussian_mean," << detail::g17(mean) << "\n";
        csv << "gaussian_variance," << detail::g17(var) << "\n";
        res.check(std::abs(mean) <= 0.02, "noise-test: gaussian mean off");
        res.check(var >= 1.9 && var <= 2.1, "noise-test: gaussian variance outside [1.9, 2.1]");
    }

    // empirical characteristic function of S_1.5(1,0,0)
    {
        Rng rng(derive_seed(cfg.seeds.front(), 0xecf));
        StableParams p{1.5, 0.0, 1.0, 0.0};
        const std::size_t n = 1000000;
        const double thetas[] = {0.5, 1.0, 2.0, 5.0};
        double acc[4] = {0, 0, 0, 0};
        for (std::size_t k = 0; k < n; ++k) {
            const double x = sample_stable(p, rng);
            for (int j = 0; j < 4; ++j) acc[j] += std::cos(thetas[j] * x);
        }
        for (int j = 0; j < 4; ++j) {
            const double ecf = acc[j] / static_cast<double>(n);
            const double exact = std::exp(-std::pow(thetas[j], 1.5));
            csv << "ecf_theta_" << thetas[j] << "," << detail::g17(ecf) << "\n";
            res.check(std::abs(ecf - exact) <= 0.01,
                      "noise-test: characteristic function off at theta=" +
                          std::to_string(thetas[j]));
        }
    }

    // seeded reproducibility of path generation
    {
        StableParams p{cfg.alpha, 0.0, 1.0, 0.0};
        const StablePath a = gen_path(p, 1, -10.0, 10.0, cfg.noise_dt, cfg.seeds.front());
        const StablePath b = gen_path(p, 1, -10.0, 10.0, cfg.noise_dt, cfg.seeds.front());
        res.check(a.values == b.values, "noise-test: same seed gave different paths");
    }
    return res;
}

// --- ou-test --------------------------------------------------------------

inline RunResult run_ou_test(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    RunResult res;

    // impulse response: unit increment on the cell starting at 0 gives
    // z(t) = e^{-t} up to O(dt)
    {
        const double dt = 1e-3;
        const std::size_t n_cells = static_cast<std::size_t>(std::llround(45.0 / dt));
        std::vector<double> inc(n_cells, 0.0);
        const std::size_t zero_cell = static_cast<std::size_t>(std::llround(40.0 / dt));
        inc[zero_cell] = 1.0;
        const StablePath path = StablePath::from_increments(-40.0, dt, {inc});
        const std::vector<double> z = ou_series(path, 0, cfg.trunc_T, 0.0, 5.0);
        double worst = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) {
            const double t = dt * static_cast<double>(k);
            if (t < dt) continue; // impulse lands after the first node
            worst = std::max(worst, std::abs(z[k] - std::exp(-t)));
        }
        res.check(worst <= 5.0 * dt, "ou-test: impulse response error " + detail::g17(worst) +
                                         " exceeds 5*dt");
    }

    // recursion vs quadrature on the same omega at dt and dt/2
    {
        std::vector<double> ratios;
        for (std::uint64_t seed : cfg.seeds) {
            StableParams p{cfg.alpha, 0.0, 1.0, 0.0};
            const double fine_dt = 5e-3;
            const StablePath fine = gen_path(p, 1, -cfg.trunc_T - 10.0, 10.0, fine_dt, seed);
            const StablePath coarse = coarsen(fine, 2);
            auto discrepancy = [&](const StablePath& path) {
                const std::vector<double> z = ou_series(path, 0, cfg.trunc_T, 0.0, 10.0);
                double worst = 0.0;
                for (int j = 1; j <= 10; ++j) {
                    const double t = static_cast<double>(j);
                    const std::size_t k = static_cast<std::size_t>(
                        std::llround(t / path.dt));
                    worst = std::max(worst,
                                     std::abs(z[k] - ou_at(path, 0, t, cfg.trunc_T).value));
                }
                return worst;
            };
            const double d_coarse = discrepancy(coarse);
            const double d_fine = discrepancy(fine);
            if (d_fine > 0.0) ratios.push_back(d_coarse / d_fine);
        }
        const double r = detail::median(ratios);
        res.check(r >= 1.6 && r <= 2.6,
                  "ou-test: recursion-vs-quadrature halving ratio " + detail::g17(r) +
                      " outside [1.6, 2.6]");
    }

    // conjugacy scalar identity
    {
        StableParams p{cfg.alpha, 0.0, 1.0, 0.0};
        const StablePath path = gen_path(p, 1, -cfg.trunc_T - 1.0, 1.0, cfg.noise_dt,
                                         cfg.seeds.front());
        const double xi = ou_at(path, 0, 0.0, cfg.trunc_T).value;
        res.check(std::abs(lambda_factor(xi) * lambda_inverse(xi) - 1.0) <= 1e-15,
                  "ou-test: lambda forward*inverse != 1");
    }

    // dump one seeded series
    {
        StableParams p{cfg.alpha, 0.0, 1.0, 0.0};
        const StablePath path = gen_path(p, cfg.epsilons.size(), -cfg.trunc_T - 10.0, 10.0,
                                         cfg.noise_dt, cfg.seeds.front());
        const OUSeries ou = make_ou_series(path, cfg.epsilons, cfg.trunc_T, 0.0, 10.0);
        auto csv = detail::open_out(out, "ou.csv");
        dump_ou_csv(ou, csv);
    }
    return res;
}

// --- simulate -------------------------------------------------------------

inline RunResult run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    RunResult res;
    const SystemParams p = cfg.system_params();
    const bool noise_free =
        std::all_of(cfg.epsilons.begin(), cfg.epsilons.end(), [](double e) { return e == 0.0; });
    const bool unforced = norm2(p.h) == 0.0 && norm2(p.g) == 0.0;

    StateE psi0(p.I);
    psi0.U = exp_profile(p.I, 1.0, 8.0);
    psi0.V = exp_profile(p.I, 1.0, 8.0);

    for (std::uint64_t seed : cfg.seeds) {
        StableParams sp{cfg.alpha, 0.0, 1.0, 0.0};
        const StablePath path = gen_path(sp, cfg.epsilons.size(), -cfg.trunc_T, cfg.t_span,
                                         cfg.noise_dt, seed);
        const OUSeries ou = make_ou_series(path, cfg.epsilons, cfg.trunc_T, 0.0, cfg.t_span);
        Trajectory traj;
        try {
            traj = integrate_transformed(p, ou, 0.0, psi0, cfg.t_span, cfg.refine(),
                                         "simulate", seed);
        } catch (const diagnostic_error& e) {
            res.check(false, std::string("simulate: ") + e.what());
            continue;
        }
        auto csv = detail::open_out(out, "traj_seed" + std::to_string(seed) + ".csv");
        dump_trajectory_csv(traj, csv);

        const GrowthBounds gb = growth_bounds(ou, p, 0.0, cfg.t_span);
        const double viol = growth_bound_violation(traj, gb);
        res.check(viol <= 1e-6 * (1.0 + norm2(psi0) * std::exp(gb.a) + gb.b),
                  "simulate: global existence bound violated by " + detail::g17(viol) +
                      " (seed " + std::to_string(seed) + ")");

        if (noise_free && unforced) {
            // Gronwall: E(t) <= e^{-delta t} E(0)
            bool ok = true;
            for (std::size_t k = 0; k < traj.n_nodes(); ++k)
                ok = ok && traj.energy[k] <=
                               std::exp(-p.delta() * (traj.time_at(k) - traj.t0)) *
                                   traj.energy[0] * (1.0 + 1e-3);
            res.check(ok, "simulate: deterministic Gronwall decay violated");
        }
    }
    return res;
}

// --- conjugacy ------------------------------------------------------------

inline RunResult run_conjugacy(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    RunResult res;
    const SystemParams p = cfg.system_params();
    const double T = std::min(cfg.t_span, 5.0);

    StateE psi0(p.I);
    psi0.U = exp_profile(p.I, 0.5, 8.0);
    psi0.V = exp_profile(p.I, 0.5, 8.0);

    auto csv = detail::open_out(out, "conjugacy.csv");
    csv << "seed,err_coarse,err_fine,ratio\n";

    auto terminal_error = [&](const StablePath& path) {
        const OUSeries ou = make_ou_series(path, p.epsilons, cfg.trunc_T, 0.0, T);
        const double xi0 = ou.xi[ou.index_of(0.0)];
        StateE start = psi0;
        start.U *= lambda_inverse(xi0);
        start.V *= lambda_inverse(xi0);
        const Trajectory phi = integrate_transformed(p, ou, 0.0, start, T, 1, "conjugacy");
        const Trajectory psi_conj = map_to_original(phi, ou);
        const Trajectory psi_dir = integrate_marcus_direct(p, path, 0.0, psi0, T, "conjugacy");
        return std::sqrt(dist2(psi_conj.states.back(), psi_dir.states.back()));
    };

    std::vector<double> ratios;
    for (std::uint64_t seed : cfg.seeds) {
        StableParams sp{cfg.alpha, 0.0, 1.0, 0.0};
        const StablePath fine = gen_path(sp, p.epsilons.size(), -cfg.trunc_T, T,
                                         cfg.noise_dt / 2.0, seed);
        const StablePath coarse = coarsen(fine, 2);
        try {
            const double e_coarse = terminal_error(coarse);
            const double e_fine = terminal_error(fine);
            const double ratio = e_fine > 0.0 ? e_coarse / e_fine : 0.0;
            csv << seed << "," << detail::g17(e_coarse) << "," << detail::g17(e_fine) << ","
                << detail::g17(ratio) << "\n";
            if (e_fine > 0.0) ratios.push_back(ratio);
        } catch (const diagnostic_error& e) {
            res.check(false, std::string("conjugacy: ") + e.what());
        }
    }
    if (!ratios.empty()) {
        const double r = detail::median(ratios);
        res.check(r >= 1.5 && r <= 3.0, "conjugacy: dt-halving ratio " + detail::g17(r) +
                                            " outside [1.5, 3]");
    }
    return res;
}

// --- absorb ---------------------------------------------------------------

inline RunResult run_absorb(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    RunResult res;
    const SystemParams p = cfg.system_params();
    const double t_max = *std::max_element(cfg.t_grid.begin(), cfg.t_grid.end());

    auto csv = detail::open_out(out, "absorption.csv");
    csv << "t,seed,terminal_energy,R2,absorbed\n";

    std::size_t blowup_seeds = 0, absorbed_seeds = 0;
    for (std::uint64_t seed : cfg.seeds) {
        StableParams sp{cfg.alpha, 0.0, 1.0, 0.0};
        const StablePath path = gen_path(sp, p.epsilons.size(),
                                         -t_max - cfg.quad_horizon - cfg.trunc_T, 0.0,
                                         cfg.noise_dt, seed);
        AbsorptionReport rep;
        try {
            rep = pullback_absorption(p, path, cfg.B_radius, cfg.t_grid, cfg.m_points,
                                      cfg.trunc_T, cfg.quad_horizon, cfg.refine(), seed);
        } catch (const diagnostic_error&) {
            ++blowup_seeds;
            continue;
        }
        for (const AbsorptionRecord& r : rep.records) {
            if (r.blowup) continue;
            csv << detail::g17(r.t) << "," << seed << "," << detail::g17(r.terminal_energy)
                << "," << detail::g17(r.R2) << "," << (r.absorbed ? 1 : 0) << "\n";
        }
        if (rep.blowups > 0 && rep.t_B < 0.0) {
            ++blowup_seeds;
            continue;
        }
        if (rep.t_B >= 0.0) ++absorbed_seeds;
    }
    const std::size_t n = cfg.seeds.size();
    res.check(blowup_seeds * 5 < n || n < 5,
              "absorb: blow-up fraction " + std::to_string(blowup_seeds) + "/" +
                  std::to_string(n) + " reaches 20%");
    res.check(absorbed_seeds + blowup_seeds == n,
              "absorb: some seed never entered the absorbing ball on the tested t-grid");
    return res;
}

// --- tempered -------------------------------------------------------------

inline RunResult run_tempered(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    RunResult res;
    const SystemParams p = cfg.system_params();

    auto csv = detail::open_out(out, "tempered.csv");
    csv << "t,seed,scaled_R2\n";

    // allow the radius quadrature to stretch its horizon fourfold for seeds
    // with a deep xi excursion near the base horizon
    const double max_horizon = 4.0 * cfg.quad_horizon;
    for (std::uint64_t seed : cfg.seeds) {
        StableParams sp{cfg.alpha, 0.0, 1.0, 0.0};
        const StablePath path = gen_path(sp, p.epsilons.size(),
                                         -cfg.tempered_t_max - max_horizon - cfg.trunc_T,
                                         0.0, cfg.noise_dt, seed);
        const TemperednessReport rep = temperedness_of_K(p, path, cfg.gamma, cfg.tempered_t_max,
                                                         cfg.tempered_t_step, cfg.trunc_T,
                                                         cfg.quad_horizon, max_horizon);
        for (std::size_t k = 0; k < rep.t.size(); ++k)
            csv << detail::g17(rep.t[k]) << "," << seed << "," << detail::g17(rep.scaled[k])
                << "\n";
        res.check(rep.decays, "tempered: no decay verdict for seed " + std::to_string(seed));
        res.check(rep.scaled.back() < 1e-3 * rep.scaled.front(),
                  "tempered: final value not below 1e-3 of initial for seed " +
                      std::to_string(seed));
    }
    return res;
}

// --- tails ----------------------------------------------------------------

inline RunResult run_tails(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    RunResult res;
    const SystemParams p = cfg.system_params();
    const double t_max = *std::max_element(cfg.t_grid.begin(), cfg.t_grid.end());

    auto csv = detail::open_out(out, "tails.csv");
    csv << "t,N,seed,tail_mass\n";

    std::size_t found = 0;
    for (std::uint64_t seed : cfg.seeds) {
        StableParams sp{cfg.alpha, 0.0, 1.0, 0.0};
        const StablePath path = gen_path(sp, p.epsilons.size(),
                                         -t_max - cfg.quad_horizon - cfg.trunc_T, 0.0,
                                         cfg.noise_dt, seed);
        NullnessReport rep;
        try {
            rep = asymptotic_null_experiment(p, path, cfg.t_grid, cfg.N_grid, cfg.eps,
                                             cfg.m_points, cfg.trunc_T, cfg.quad_horizon,
                                             cfg.refine(), seed);
        } catch (const diagnostic_error& e) {
            res.check(false, std::string("tails: ") + e.what());
            continue;
        }
        for (const NullnessCell& c : rep.table)
            csv << detail::g17(c.t) << "," << c.N << "," << seed << "," << detail::g17(c.max_tail)
                << "\n";
        if (rep.found) ++found;

        // partial tail sums are non-increasing in N at fixed t
        for (std::size_t a = 0; a < rep.table.size(); ++a)
            for (std::size_t b = a + 1; b < rep.table.size(); ++b)
                if (rep.table[a].t == rep.table[b].t && rep.table[a].N < rep.table[b].N)
                    res.check(rep.table[b].max_tail <= rep.table[a].max_tail * (1.0 + 1e-12),
                              "tails: tail mass not monotone in N");
    }
    res.check(found * 10 >= cfg.seeds.size() * 9,
              "tails: (T,N) found for only " + std::to_string(found) + "/" +
                  std::to_string(cfg.seeds.size()) + " seeds (need >= 90%)");
    return res;
}

// --- attractor ------------------------------------------------------------

inline RunResult run_attractor(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    RunResult res;
    const SystemParams p = cfg.system_params();
    std::vector<double> schedule = cfg.pullback_schedule;
    std::sort(schedule.begin(), schedule.end());
    const double t_max = schedule.back();

    auto cloud_csv = detail::open_out(out, "clouds.csv");
    cloud_csv << "seed,t_pullback,point_id,i,U_i,V_i\n";
    auto haus_csv = detail::open_out(out, "hausdorff.csv");
    haus_csv << "seed,t,hausdorff\n";

    for (std::uint64_t seed : cfg.seeds) {
        StableParams sp{cfg.alpha, 0.0, 1.0, 0.0};
        const StablePath path = gen_path(sp, p.epsilons.size(),
                                         -t_max - cfg.quad_horizon - cfg.trunc_T, 0.0,
                                         cfg.noise_dt, seed);
        std::vector<AttractorCloud> clouds;
        try {
            for (double t : schedule)
                clouds.push_back(attractor_cloud(p, path, t, cfg.m_points, cfg.trunc_T,
                                                 cfg.quad_horizon, cfg.refine(), seed));
        } catch (const diagnostic_error& e) {
            res.check(false, std::string("attractor: ") + e.what());
            continue;
        }
        for (const AttractorCloud& c : clouds) {
            for (std::size_t pt = 0; pt < c.points.size(); ++pt)
                for (int i = -p.I; i <= p.I; ++i)
                    cloud_csv << seed << "," << detail::g17(c.t_pullback) << "," << pt << ","
                              << i << "," << detail::g17(c.points[pt].U.at(i)) << ","
                              << detail::g17(c.points[pt].V.at(i)) << "\n";
        }
        // Hausdorff semi-distances of consecutive stages: non-increasing
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k + 1 < clouds.size(); ++k) {
            if (clouds[k].points.empty() || clouds[k + 1].points.empty()) continue;
            const double d = hausdorff_semidist(clouds[k + 1].points, clouds[k].points);
            haus_csv << seed << "," << detail::g17(schedule[k + 1]) << "," << detail::g17(d)
                     << "\n";
            res.check(d <= prev + 10.0 * cfg.solver_dt,
                      "attractor: nesting distance increased at t=" +
                          detail::g17(schedule[k + 1]) + " (seed " + std::to_string(seed) + ")");
            prev = d;
        }
    }
    return res;
}

// --- dispatch -------------------------------------------------------------

using RunFn = RunResult (*)(const ExperimentConfig&, const std::filesystem::path&);

inline const std::vector<std::pair<std::string, RunFn>>& subcommand_table() {
    static const std::vector<std::pair<std::string, RunFn>> table = {
        {"noise-test", run_noise_test}, {"ou-test", run_ou_test}, {"simulate", run_simulate},
        {"conjugacy", run_conjugacy},   {"absorb", run_absorb},   {"tempered", run_tempered},
        {"tails", run_tails},           {"attractor", run_attractor}};
    return table;
}

inline RunResult run_subcommand(const std::string& name, const ExperimentConfig& cfg,
                                const std::filesystem::path& out) {
    Manifest manifest(cfg, out, name);
    auto timed = [&](const std::string& n, RunFn fn) {
        const auto begin = std::chrono::steady_clock::now();
        RunResult r = fn(cfg, out);
        manifest.time(n, begin);
        return r;
    };
    if (name == "all") {
        RunResult res;
        for (const auto& [sub, fn] : subcommand_table()) res.merge(timed(sub, fn));
        return res;
    }
    for (const auto& [sub, fn] : subcommand_table())
        if (name == sub) return timed(sub, fn);
    throw config_error("unknown subcommand `" + name + "`");
}

} // namespace fhn
