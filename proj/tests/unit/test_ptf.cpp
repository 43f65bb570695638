#include "doctest.h"

#include <cmath>
#include <numbers>

#include "sqh/oscillator.hpp"
#include "sqh/ptf.hpp"
#include "sqh/rng.hpp"

using namespace sqh;
using numerics::Field;
using numerics::Grid1D;
using qpotential::PotentialSpec;

namespace {

Field gaussian(const Grid1D& g, double mu, double var)
{
    return numerics::normalize(
        numerics::sample(g, [&](double x) { return std::exp(-(x - mu) * (x - mu) / (2.0 * var)); }));
}

Field random_density(const Grid1D& g, const rng::CounterRng& r, std::uint64_t& k)
{
    Field n(g);
    const int parts = 1 + static_cast<int>(r.bits(k++) % 4);
    for (int c = 0; c < parts; ++c) {
        const double mu = 8.0 * (r.uniform(k++) - 0.5);
        const double var = 0.05 + 2.0 * r.uniform(k++);
        const double w = r.uniform(k++);
        for (std::size_t i = 0; i < g.n_points; ++i) n[i] += w * std::exp(-(g.x(i) - mu) * (g.x(i) - mu) / (2.0 * var));
    }
    return numerics::normalize(n);
}

double sup_on_support(const Field& a, const Field& b, const Field& n)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i)
        if (n[i] > ptf::kSupportRel * n.max()) s = std::max(s, std::abs(a[i] - b[i]));
    return s;
}

}  // namespace

TEST_CASE("propagation conserves probability and positivity")
{
    const auto g = Grid1D::make(-8.0, 8.0, 512);
    const auto p = params::natural(0.05, 0.1);
    const rng::CounterRng r(77, 0);
    std::uint64_t k = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = random_density(g, r, k);
        const auto K = ptf::kernel_zero(n, PotentialSpec::harmonic(1.0), p, 0.05);
        const auto out = ptf::propagate(n, K);
        CHECK(std::abs(numerics::integrate(out) - 1.0) <= 1e-9);
        for (double v : out.values) CHECK(v >= 0.0);
    }
}

TEST_CASE("kernel columns are normalized Gaussians around the drift")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto n = oscillator::quasi_eigenstate(0, p, g).density;
    const double dt = 0.05;
    const auto K = ptf::kernel_zero(n, PotentialSpec::harmonic(1.0), p, dt);
    const double sigma = std::sqrt(2.0 * p.diffusion * dt);
    CHECK(K.sigma == doctest::Approx(sigma).epsilon(1e-14));
    for (double v : K.values) CHECK(v >= 0.0);
    for (std::size_t j = 200; j < g.n_points - 200; j += 37) {
        CHECK(K.column_integral(j) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(std::abs(K.column_mean(j) - (g.x(j) + K.drift[j] * dt)) <= 1e-3 * sigma);
        CHECK(K.column_std(j) == doctest::Approx(sigma).epsilon(0.01));
    }
}

TEST_CASE("kernel concentrates as D vanishes")
{
    const Grid1D g;
    auto p = params::natural(0.05, 0.1);
    const auto n = gaussian(g, 0.5, 0.6);
    const auto drift = ptf::kernel_drift(n, PotentialSpec::harmonic(1.0), p);
    const double dt = 0.05;
    double prev = INFINITY;
    for (double D : {1e-2, 1e-4, 1e-6}) {
        p.diffusion = D;
        const auto K = ptf::kernel_from_drift(drift, p, dt);
        const double sigma = std::sqrt(2.0 * D * dt);
        for (std::size_t j = 700; j < 1400; j += 101) {
            // a sub-grid Gaussian is sampled on a few nodes, so its mean is only good to dq/2
            const double tol = sigma > 2.0 * g.dq() ? 0.01 * g.dq() : 0.5 * g.dq();
            CHECK(std::abs(K.column_mean(j) - (g.x(j) + drift[j] * dt)) <= tol);
            if (sigma > 2.0 * g.dq()) CHECK(K.column_std(j) == doctest::Approx(sigma).epsilon(0.01));
            CHECK(K.column_std(j) <= std::max(1.01 * sigma, g.dq()));
        }
        CHECK(K.column_std(1000) < prev);
        prev = K.column_std(1000);
    }
    p.diffusion = 0.0;
    CHECK_THROWS(ptf::kernel_zero(n, PotentialSpec::harmonic(1.0), p, dt));
}

TEST_CASE("short-time kernel without drift is a heat step")
{
    const Grid1D g;
    auto p = params::natural(0.05, 0.1);
    p.diffusion = 1e-4;
    const auto n = gaussian(g, 0.0, 0.7);
    const double dt = 0.01;
    const auto K = ptf::kernel_from_drift(Field(g), p, dt);
    const auto out = ptf::propagate(n, K);
    const auto d2 = numerics::derivative(n, 2);
    double n2 = 0.0;
    for (double v : d2.values) n2 += std::abs(v) * g.dq();
    CHECK(numerics::l1_distance(out, n) <= 2.0 * p.diffusion * dt * n2);
}

TEST_CASE("stationary quasi-ground state")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto n = oscillator::quasi_eigenstate(0, p, g).density;
    const auto V = PotentialSpec::harmonic(1.0);
    const double dt = 0.05;

    // the analytic state is stationary up to the scheme's O(dt) bias
    const auto s = ptf::step(n, V, p, dt);
    CHECK(s.converged);
    CHECK(numerics::l1_distance(s.density, n) <= 1e-4);

    // at the scheme's own stationary state refinement has nothing left to do
    ptf::EvolveOptions eo;
    eo.dt = dt;
    eo.t_end = 100.0;
    eo.stationarity_eps = 1e-9;
    const auto rec = ptf::evolve(n, V, p, eo);
    REQUIRE(rec.stationary);
    const auto& m = rec.final_density;
    CHECK(numerics::l1_distance(m, n) <= 1e-3);
    const auto sm = ptf::step(m, V, p, dt);
    CHECK(sm.converged);
    CHECK(sm.iterations <= 2);
    const auto K0 = ptf::kernel_zero(m, V, p, dt);
    const auto K1 = ptf::refine(K0, ptf::propagate(m, K0), V, p);
    CHECK(sup_on_support(K1.drift, K0.drift, m) <= 1e-6);
}

TEST_CASE("refinement contracts on a displaced Gaussian")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto V = PotentialSpec::harmonic(1.0);
    const auto n = gaussian(g, 1.0, 0.5);
    const double dt = 0.05;
    const auto K0 = ptf::kernel_zero(n, V, p, dt);
    const auto n1 = ptf::propagate(n, K0);
    const auto K1 = ptf::refine(K0, n1, V, p);
    const auto n2 = ptf::propagate(n, K1);
    // residual of the midpoint rule: ½(drift(prediction) + drift(start)) against the drift used
    auto residual = [&](const ptf::TransitionKernel& K, const Field& pred) {
        const auto d = ptf::kernel_drift(pred, V, p);
        Field mid(g);
        for (std::size_t i = 0; i < g.n_points; ++i) mid[i] = 0.5 * (d[i] + K.source_drift[i]);
        return sup_on_support(mid, K.drift, pred);
    };
    CHECK(2.0 * residual(K1, n2) <= residual(K0, n1));
}

TEST_CASE("accelerated and plain refinement share the fixed point")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto V = PotentialSpec::harmonic(1.0);
    const auto n = gaussian(g, 1.0, 0.5);
    ptf::StepOptions fast;
    fast.tol = 1e-12;
    fast.max_refine = 60;
    fast.max_halvings = 0;
    ptf::StepOptions plain = fast;
    plain.accelerate = false;
    plain.max_refine = 400;
    const auto a = ptf::step(n, V, p, 0.05, fast);
    const auto b = ptf::step(n, V, p, 0.05, plain);
    CHECK(a.converged);
    CHECK(b.converged);
    CHECK(numerics::l1_distance(a.density, b.density) <= 1e-9);
}

TEST_CASE("refinement is inert in the deterministic limit")
{
    const Grid1D g;
    auto p = params::natural(0.05, 0.1);
    p.diffusion = 1e-6;
    const auto n = oscillator::eigenstate(0, p, g).density;
    const auto s = ptf::step(n, PotentialSpec::harmonic(1.0), p, 0.05);
    CHECK(s.iterations == 1);
    CHECK(s.converged);
}

TEST_CASE("relaxation of a displaced Gaussian")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto target = oscillator::quasi_eigenstate(0, p, g).density;
    ptf::EvolveOptions o;
    o.dt = 0.05;
    o.t_end = 15.0;
    o.save_every = 20;
    const auto r = ptf::evolve(gaussian(g, 1.0, 0.5), PotentialSpec::harmonic(1.0), p, o);
    CHECK(numerics::l1_distance(r.final_density, target) <= 0.02);
    CHECK(r.monotone_fraction() >= 0.9);
    CHECK(r.nonconverged_steps == 0);
    for (int it : r.iterations) CHECK(it <= o.step.max_refine);
    for (const auto& s : r.snapshots) CHECK(numerics::integrate(s) == doctest::Approx(1.0).epsilon(1e-9));

    // halving the step leaves the stationary state in place
    o.dt = 0.025;
    const auto h = ptf::evolve(gaussian(g, 1.0, 0.5), PotentialSpec::harmonic(1.0), p, o);
    CHECK(numerics::l1_distance(h.final_density, r.final_density) <= 1e-3);
}

TEST_CASE("noisy ground state holds its variance")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto n0 = oscillator::quasi_eigenstate(0, p, g).density;
    ptf::EvolveOptions o;
    o.dt = 0.05;
    o.t_end = 20.0 / p.beta;
    o.stop_when_stationary = false;
    const auto r = ptf::evolve(n0, PotentialSpec::harmonic(1.0), p, o);
    CHECK(numerics::variance(r.final_density) == doctest::Approx(numerics::variance(n0)).epsilon(0.01));
}

TEST_CASE("the first excited quasi-eigenstate decays to the ground state")
{
    // stationary to first order, but not stable under the noisy dynamics
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    ptf::EvolveOptions o;
    o.dt = 0.05;
    o.t_end = 20.0 / p.beta;
    const auto r = ptf::evolve(oscillator::quasi_eigenstate(1, p, g).density, PotentialSpec::harmonic(1.0), p, o);
    CHECK(numerics::l1_distance(r.final_density, oscillator::quasi_eigenstate(0, p, g).density) <= 0.02);
}
