// Acceptance harness: one PASS/FAIL line per criterion.  Exit status is 1 when
// any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bernoulli_oracle.hpp"
#include "sqh/numerics.hpp"
#include "sqh/oscillator.hpp"
#include "sqh/params.hpp"
#include "sqh/ptf.hpp"
#include "sqh/qpotential.hpp"
#include "sqh/rng.hpp"
#include "sqh/sde.hpp"
#include "sqh/superposition.hpp"

using namespace sqh;
using numerics::Field;
using numerics::Grid1D;
using qpotential::PotentialSpec;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Field gaussian(const Grid1D& g, double mu, double var)
{
    return numerics::normalize(
        numerics::sample(g, [&](double x) { return std::exp(-(x - mu) * (x - mu) / (2.0 * var)); }));
}

double sup_valid(const qpotential::MaskedField& m, const Field& n, double rel)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i)
        if (m.valid[i] && n[i] > rel * n.max()) s = std::max(s, std::abs(m.field[i]));
    return s;
}

Verdict flatness()
{
    const Grid1D g;
    const auto p = params::natural(0.0, 0.0);
    const auto V = PotentialSpec::harmonic(1.0).evaluate(g, p);
    double worst = 0.0;
    for (int j = 0; j <= 4; ++j) {
        const auto e = oscillator::eigenstate(j, p, g);
        const auto vq = qpotential::vqu(e.density, p);
        for (std::size_t i = 0; i < g.n_points; ++i)
            if (vq.valid[i] && e.density[i] > 1e-8 * e.density.max())
                worst = std::max(worst, std::abs(V[i] + vq.field[i] - (j + 0.5)));
    }
    return {worst <= 1e-6, fmt("max |V + V_qu - (j+1/2)| over j = 0..4 is %.2e (tol 1e-6)", worst)};
}

Verdict quantization()
{
    const Grid1D g;
    const auto p = params::natural(0.0, 0.0);
    const auto V = PotentialSpec::harmonic(1.0).evaluate(g, p);
    double worst = 0.0;
    for (int j = 0; j <= 4; ++j) {
        const auto e = oscillator::eigenstate(j, p, g);
        const auto vq = qpotential::vqu(e.density, p);
        std::vector<double> w(g.n_points, 0.0);
        for (std::size_t i = 0; i < g.n_points; ++i)
            if (vq.valid[i]) w[i] = e.density[i] * (V[i] + vq.field[i]);
        worst = std::max(worst, std::abs(numerics::integrate(g, w) / (j + 0.5) - 1.0));
    }
    return {worst <= 1e-6, fmt("max relative error of the hydrodynamic energy, j = 0..4: %.2e (tol 1e-6)", worst)};
}

Verdict noisy_ground()
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const double a = oscillator::ground_inverse_width(p);
    const auto n = numerics::normalize(numerics::sample(g, [&](double q) { return std::exp(-a * q * q); }));
    const double res =
        sup_valid(qpotential::stationarity_residual(n, PotentialSpec::harmonic(1.0), p), n, 1e-8);
    ptf::EvolveOptions o;
    o.dt = 0.05;
    o.t_end = 20.0 / p.beta;
    o.stop_when_stationary = false;
    const auto r = ptf::evolve(n, PotentialSpec::harmonic(1.0), p, o);
    const double drift = std::abs(numerics::variance(r.final_density) / numerics::variance(n) - 1.0);
    return {res <= 1e-4 && drift < 0.01,
            fmt("residual sup %.2e (tol 1e-4); variance drift over t = %.0f: %.2e (tol 1e-2)", res, o.t_end, drift)};
}

Verdict energy_shift()
{
    const Grid1D g;
    bool ok = true;
    std::string d;
    for (double gamma : {0.02, 0.1}) {
        const auto p = params::natural(0.05, gamma);
        const double gt = gamma * 0.05;
        const auto q = oscillator::quasi_eigenstate(0, p, g);
        const double shift_err = std::abs((q.energy - 0.5) / gt - 1.0);
        const double model = std::sqrt(3.0 / 8.0) * gt;
        const double spread_err = std::abs(q.energy_spread / model - 1.0);
        ok = ok && shift_err <= 0.02 && spread_err <= 0.05;
        d += fmt("%sGamma*theta = %.3f: shift error %.2e (tol 2e-2), spread %.3e vs %.3e, error %.2f (tol 5e-2)",
                 d.empty() ? "" : "; ", gt, shift_err, q.energy_spread, model, spread_err);
    }
    return {ok, d};
}

Verdict bernoulli()
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto f0 = oscillator::bernoulli_f(0, p, g);
    double z = 0.0;
    for (double v : f0.f.values) z = std::max(z, std::abs(v));
    const auto b = oscillator::bernoulli_f(1, p, g);
    const auto n = oscillator::quasi_eigenstate(1, p, g).density;
    std::vector<std::size_t> idx;
    std::vector<double> xs;
    for (std::size_t i = g.n_points / 2; i < g.n_points; ++i)
        if (n[i] > 1e-6 * n.max()) {
            idx.push_back(i);
            xs.push_back(g.x(i));
        }
    const auto ref = test::f1_oracle(xs);
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        err = std::max(err, std::abs(b.f[idx[k]] - ref[k]));
        scale = std::max(scale, std::abs(ref[k]));
    }
    const double rel = err / scale;
    return {z <= 1e-10 && rel <= 1e-4,
            fmt("max |f_0| = %.1e (tol 1e-10); f_1 vs ODE oracle relative error %.2e (tol 1e-4)", z, rel)};
}

Verdict estimators()
{
    const Grid1D g;
    bool ok = true;
    std::string d;
    for (double gamma : {0.02, 0.05, 0.1}) {
        const auto p = params::natural(0.05, gamma);
        const auto q0 = oscillator::quasi_eigenstate(0, p, g);
        const auto q1 = oscillator::quasi_eigenstate(1, p, g);
        const double ev = oscillator::gamma_from_energy_variance(q0.energy_spread, p.kT());
        const double ls =
            oscillator::gamma_from_level_spacing(q1.energy - q0.energy, q0.width2_ref, q1.width2, q0.width2, p);
        const double e1 = std::abs(ev / gamma - 1.0), e2 = std::abs(ls / gamma - 1.0);
        ok = ok && e1 <= 0.05 && e2 <= 0.05;
        d += fmt("%sGamma %.2f: energy-variance %.4f (err %.2f), level-spacing %.4f (err %.3f)", d.empty() ? "" : "; ",
                 gamma, ev, e1, ls, e2);
    }
    return {ok, d + " (tol 5e-2)"};
}

Verdict spreading()
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    sde::SdeOptions o;
    o.n_traj = 100000;
    o.dt = 0.05;
    o.t_end = 10.0;
    o.quantum = false;
    o.seed = 2024;
    o.workers = 1;
    const auto r = sde::simulate_mean_field(gaussian(g, 0.0, 0.5), PotentialSpec::free(), p, o);
    double st = 0.0, sv = 0.0, stt = 0.0, stv = 0.0;
    const double m = static_cast<double>(r.moments.size());
    for (const auto& mo : r.moments) {
        st += mo.t;
        sv += mo.variance;
        stt += mo.t * mo.t;
        stv += mo.t * mo.variance;
    }
    const double slope = (m * stv - st * sv) / (m * stt - st * st);
    const double err = std::abs(slope / (2.0 * p.diffusion) - 1.0);
    return {err <= 0.02, fmt("variance slope %.5f vs 2D = %.5f, error %.2e (tol 2e-2)", slope, 2.0 * p.diffusion, err)};
}

Verdict cross_solver()
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto n0 = gaussian(g, 1.0, 0.5);
    ptf::EvolveOptions po;
    po.dt = 0.05;
    po.t_end = 10.0;
    po.stop_when_stationary = false;
    const auto a = ptf::evolve(n0, PotentialSpec::harmonic(1.0), p, po);
    sde::SdeOptions so;
    so.n_traj = 100000;
    so.dt = 0.01;
    so.t_end = 10.0;
    so.seed = 2024;
    so.workers = 1;
    const auto b = sde::simulate_mean_field(n0, PotentialSpec::harmonic(1.0), p, so);
    const double l1 = numerics::l1_distance(a.final_density, b.snapshots.back().density);
    return {l1 <= 0.05, fmt("L1(ptf, sde) after t = 10 with 1e5 trajectories: %.2e (tol 5e-2)", l1)};
}

Verdict kernel()
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const rng::CounterRng r(99, 0);
    std::uint64_t k = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        Field n(g);
        const int parts = 1 + static_cast<int>(r.bits(k++) % 4);
        for (int c = 0; c < parts; ++c) {
            const double mu = 8.0 * (r.uniform(k++) - 0.5);
            const double var = 0.05 + 2.0 * r.uniform(k++);
            const double w = r.uniform(k++);
            for (std::size_t i = 0; i < g.n_points; ++i)
                n[i] += w * std::exp(-(g.x(i) - mu) * (g.x(i) - mu) / (2.0 * var));
        }
        n = numerics::normalize(n);
        const auto K = ptf::kernel_zero(n, PotentialSpec::harmonic(1.0), p, 0.05);
        worst = std::max(worst, std::abs(numerics::integrate(ptf::propagate(n, K)) - 1.0));
    }
    // Column widths on grids that resolve sigma (spacing sigma/10), drift −q.
    const double dt = 0.05;
    double width_err = 0.0, mean_err = 0.0;
    for (double D : {1e-2, 1e-4, 1e-6}) {
        auto pd = p;
        pd.diffusion = D;
        const double sigma = std::sqrt(2.0 * D * dt);
        const auto gd = Grid1D::make(-0.5, 0.5, static_cast<std::size_t>(std::ceil(10.0 / sigma)) + 1);
        const auto drift = numerics::sample(gd, [](double q) { return -q; });
        const auto K = ptf::kernel_from_drift(drift, pd, dt);
        for (std::size_t j = gd.n_points / 4; j < 3 * gd.n_points / 4; j += gd.n_points / 20) {
            width_err = std::max(width_err, std::abs(K.column_std(j) / sigma - 1.0));
            mean_err = std::max(mean_err, std::abs(K.column_mean(j) - gd.x(j) * (1.0 - dt)) / sigma);
        }
    }
    return {worst <= 1e-9 && width_err <= 0.01,
            fmt("max |mass - 1| over 1000 densities %.1e (tol 1e-9); column std vs sqrt(2 D dt) for D = 1e-2, "
                "1e-4, 1e-6: max error %.2e (tol 1e-2); column mean offset %.1e sigma",
                worst, width_err, mean_err)};
}

Verdict born()
{
    const auto p = params::natural(0.05, 0.1);
    const Grid1D g;
    const double T = superposition::cycle_period(superposition::SuperpositionSpec::from_magnitudes(1, 1, 0), p);
    const bool period_ok = T == 4.0 * std::numbers::pi;

    superposition::BornOptions o;
    o.workers = 1;
    const auto pure = superposition::born_trials({1.0, 0.0, 0.0}, p, g, 20, 20240, o);
    const bool pure_ok = pure.counts[0] == 20 && pure.frequency[0] == 1.0;

    const std::size_t N = 200;
    const std::uint64_t seed = 7;
    const auto st = superposition::born_trials({1.0, 1.0, 0.0}, p, g, N, seed, o);
    // rerun a prefix: trial k depends only on (seed, k)
    const auto again = superposition::born_trials({1.0, 1.0, 0.0}, p, g, 10, seed, o);
    bool same = true;
    for (std::size_t k = 0; k < again.log.size(); ++k) {
        const auto& x = st.log[k];
        const auto& y = again.log[k];
        same = same && x.t0 == y.t0 && x.seed == y.seed && x.classified == y.classified && x.fidelity == y.fidelity &&
               x.relaxation_time == y.relaxation_time;
    }
    std::string report;
    for (int j = 0; j < 2; ++j)
        report += fmt("%sstate %d: %zu/%zu = %.3f [%.3f, %.3f] target %.2f", j ? ", " : "", j, st.counts[j], N,
                      st.frequency[j], st.ci[j].lo, st.ci[j].hi, st.target[j]);
    report += fmt(", unresolved %zu", st.unresolved);
    return {period_ok && pure_ok && same,
            fmt("T = 4 pi %s; (1,0,0): %zu/20 in state 0; (1,1,0), N = %zu, seed %llu (reported, not asserted): ",
                period_ok ? "exact" : "MISMATCH", pure.counts[0], N, static_cast<unsigned long long>(seed)) +
                report + (same ? "; rerun identical" : "; RERUN DIFFERS")};
}

Verdict calculators()
{
    const auto si = params::from_temperature(1e-30, 1.0, 1e13, 0.1, 1e-10, 1.0);
    const double lc_err = std::abs(si.lambda_c / 4.0e-8 - 1.0);
    // 1/β for m = 1e-30 kg, 𝓛 = 1e-10 m over χ_D/Γ from 1e3 to 1e8
    params::PhysicalParams r;
    r.mass = 1e-30;
    r.hbar = params::si::hbar;
    r.length = 1e-10;
    r.gamma = 1e-3;
    r.chi_d = 1e3 * r.gamma;
    const double lo = 1.0 / params::beta_p2(r);
    r.chi_d = 1e8 * r.gamma;
    const double hi = 1.0 / params::beta_p2(r);
    const bool window_ok = lo / 1e-14 < 3.0 && lo / 1e-14 > 1.0 / 3.0 && hi / 1e-9 < 3.0 && hi / 1e-9 > 1.0 / 3.0;
    double prod_err = 0.0, spread = 0.0;
    const double ref = params::uncertainty_bounds(1e-30, 1.0).dE_dt_product;
    for (double T = 1e-3; T <= 1e3 * 1.0001; T *= 10.0) {
        const auto u = params::uncertainty_bounds(1e-30, T);
        prod_err = std::max(prod_err, std::abs(u.dE_dt_product / (2.0 * params::si::hbar) - 1.0));
        spread = std::max(spread, std::abs(u.dE_dt_product / ref - 1.0));
    }
    return {lc_err <= 0.01 && window_ok && prod_err <= 1e-12 && spread <= 1e-12,
            fmt("lambda_c = %.4e m (error %.1e, tol 1e-2); 1/beta window %.2e .. %.2e s; dE dt / 2 hbar - 1 = %.1e, "
                "spread over 6 decades of T %.1e (tol 1e-12)",
                si.lambda_c, lc_err, lo, hi, prod_err, spread)};
}

struct Criterion {
    const char* name;
    double budget_s;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance criteria"};
    int only = 0;
    app.add_option("--only", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {"eigenstate flatness", 1.0, flatness},
        {"energy quantization", 1.0, quantization},
        {"noisy ground state", 30.0, noisy_ground},
        {"energy shift and spread", 5.0, energy_shift},
        {"Bernoulli correction", 10.0, bernoulli},
        {"dissipation estimators", 10.0, estimators},
        {"classical spreading", 60.0, spreading},
        {"cross-solver equivalence", 300.0, cross_solver},
        {"kernel conservation and concentration", 60.0, kernel},
        {"Born harness", 1200.0, born},
        {"parameter calculators", 1.0, calculators},
    };
    bool all_pass = true;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (only != 0 && static_cast<int>(i) + 1 != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = all[i].run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = s < all[i].budget_s;
        const bool pass = v.pass && in_time;
        all_pass = all_pass && pass;
        std::printf("%s %zu %s: %s; runtime %.2f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", i + 1, all[i].name,
                    v.detail.c_str(), s, all[i].budget_s, in_time ? "" : " EXCEEDED");
        std::fflush(stdout);
    }
    return all_pass ? 0 : 1;
}
