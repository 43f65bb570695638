#include "doctest.h"

#include <cmath>
#include <numbers>

#include "sqh/oscillator.hpp"
#include "sqh/superposition.hpp"

using namespace sqh;
using namespace sqh::superposition;
using numerics::Field;
using numerics::Grid1D;

namespace {

constexpr double kPi = std::numbers::pi;

double sup_diff(const Field& a, const Field& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
    return s;
}

SuperpositionSpec rotated(SuperpositionSpec s, double phase)
{
    for (auto& c : s.coef) c.phase += phase;
    return s;
}

}  // namespace

TEST_CASE("single modes are the oscillator eigenstates")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    for (int j = 0; j < kModes; ++j) {
        const auto s = SuperpositionSpec::from_magnitudes(j == 0, j == 1, j == 2, 1.234);
        CHECK(s.lowest_mode() == j);
        const auto n = initial_density(s, p, g);
        CHECK(sup_diff(n, oscillator::eigenstate(j, p, g).density) <= 1e-12);
        CHECK(initial_velocity(s, p, g).max_abs_valid() <= 1e-6);
    }
    CHECK(SuperpositionSpec::from_magnitudes(0, 0, 0).lowest_mode() == -1);
}

TEST_CASE("initial density is normalized and periodic in the contact time")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto a = SuperpositionSpec::from_magnitudes(1.0, 0.7, 0.4, 0.9);
    auto b = a;
    b.t0 += 4.0 * kPi;
    const auto na = initial_density(a, p, g);
    CHECK(numerics::integrate(na) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sup_diff(na, initial_density(b, p, g)) <= 1e-10);
    CHECK(sup_diff(initial_velocity(a, p, g).field, initial_velocity(b, p, g).field) <= 1e-10);
}

TEST_CASE("a common phase changes nothing")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    auto s = SuperpositionSpec::from_magnitudes(1.0, 0.5, 0.8, 2.1);
    s.coef[1].phase = 0.3;
    const auto r = rotated(s, 1.1);
    CHECK(sup_diff(initial_density(s, p, g), initial_density(r, p, g)) <= 1e-12);
    CHECK(sup_diff(initial_velocity(s, p, g).field, initial_velocity(r, p, g).field) <= 1e-9);
}

TEST_CASE("half a relative cycle mirrors the two-mode density")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto a = initial_density(SuperpositionSpec::from_magnitudes(1, 1, 0, 0.0), p, g);
    const auto b = initial_density(SuperpositionSpec::from_magnitudes(1, 1, 0, kPi), p, g);
    double err = 0.0;
    for (std::size_t i = 0; i < g.n_points; ++i) err = std::max(err, std::abs(a[i] - b[g.n_points - 1 - i]));
    CHECK(err <= 1e-12);
    CHECK(sup_diff(a, b) > 0.1);  // not symmetric on its own
}

TEST_CASE("two-mode velocity is nonzero and depends on the contact time")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto a = initial_velocity(SuperpositionSpec::from_magnitudes(1, 1, 0, 0.4), p, g);
    const auto b = initial_velocity(SuperpositionSpec::from_magnitudes(1, 1, 0, 0.4 + kPi / 3.0), p, g);
    CHECK(a.max_abs_valid() > 1e-2);
    CHECK(sup_diff(a.field, b.field) > 1e-2);
    CHECK_THROWS(initial_velocity(SuperpositionSpec::from_magnitudes(1, 1, 0), params::natural(0.0, 0.0), g));
}

TEST_CASE("candidate states are mutually separated")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto c = candidates(p, g);
    for (int i = 0; i < kModes; ++i) {
        CHECK(bhattacharyya(c[i], c[i]) == doctest::Approx(1.0).epsilon(1e-12));
        for (int j = i + 1; j < kModes; ++j) CHECK(bhattacharyya(c[i], c[j]) < kClassifyThreshold);
    }
    // ∫ √(ψ0² ψ1²) dq = √(2/π) for the noiseless pair; the trapezoid rule is
    // only second order across the kink of |q| at the node
    const auto p0 = params::natural(0.0, 0.0);
    CHECK(bhattacharyya(oscillator::eigenstate(0, p0, g).density, oscillator::eigenstate(1, p0, g).density) ==
          doctest::Approx(std::sqrt(2.0 / kPi)).epsilon(1e-4));
}

TEST_CASE("classification")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto c = candidates(p, g);
    Field scaled = c[2];
    for (auto& v : scaled.values) v *= 37.0;
    const auto f = fidelities(scaled, c);
    CHECK(classify(f) == 2);
    const auto ref = fidelities(c[2], c);
    for (int j = 0; j < kModes; ++j) {
        CHECK(f[j] == doctest::Approx(ref[j]).epsilon(1e-13));
        CHECK(f[j] >= 0.0);
        CHECK(f[j] <= 1.0 + 1e-12);
    }
    CHECK(classify({0.5, 0.89, 0.2}) == -1);
    CHECK(classify({0.95, 0.91, 0.2}) == 0);
}

TEST_CASE("Wilson interval")
{
    const auto w = wilson(5, 10);
    const double z = 1.959963984540054, n = 10.0, ph = 0.5;
    const double centre = (ph + z * z / (2 * n)) / (1 + z * z / n);
    const double half = z / (1 + z * z / n) * std::sqrt(ph * (1 - ph) / n + z * z / (4 * n * n));
    CHECK(w.lo == doctest::Approx(centre - half).epsilon(1e-12));
    CHECK(w.hi == doctest::Approx(centre + half).epsilon(1e-12));
    CHECK(wilson(0, 20).lo == doctest::Approx(0.0));
    CHECK(wilson(20, 20).hi == doctest::Approx(1.0));
}

TEST_CASE("cycle period follows the lowest mode present")
{
    const auto p = params::natural(0.05, 0.1);
    CHECK(cycle_period(SuperpositionSpec::from_magnitudes(1, 1, 0), p) == doctest::Approx(4.0 * kPi).epsilon(1e-15));
    CHECK(cycle_period(SuperpositionSpec::from_magnitudes(0, 1, 1), p) == doctest::Approx(4.0 * kPi / 3.0));
    CHECK(cycle_period(SuperpositionSpec::from_magnitudes(0, 0, 2), p) == doctest::Approx(4.0 * kPi / 5.0));
}

TEST_CASE("relaxation outcomes")
{
    const Grid1D g;
    const auto p = params::natural(0.05, 0.1);
    const auto cand = candidates(p, g);
    RelaxOptions o;
    SUBCASE("ground state stays put")
    {
        const auto r = relax(SuperpositionSpec::from_magnitudes(1, 0, 0), p, g, o, &cand);
        CHECK(r.converged);
        CHECK(r.classified == 0);
        CHECK(r.fidelity[0] >= 0.999);
        CHECK(numerics::integrate(r.final_density) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("excited state decays to the ground state")
    {
        const auto r = relax(SuperpositionSpec::from_magnitudes(0, 1, 0), p, g, o, &cand);
        CHECK(r.classified == 0);
    }
    SUBCASE("two-mode outcome is reproducible")
    {
        const auto s = SuperpositionSpec::from_magnitudes(1, 1, 0, 5.861847419213475);
        const auto a = relax(s, p, g, o, &cand);
        const auto b = relax(s, p, g, o, &cand);
        CHECK(a.classified != -1);
        CHECK(a.final_density.values == b.final_density.values);
        CHECK(a.fidelity == b.fidelity);
    }
}

TEST_CASE("Born harness bookkeeping and reproducibility")
{
    const auto g = Grid1D::make(-8.0, 8.0, 1024);
    const auto p = params::natural(0.05, 0.1);
    BornOptions o;
    o.relax.t_end = 6.0;
    o.workers = 1;
    const auto a = born_trials({1.0, 1.0, 0.0}, p, g, 3, 11, o);
    o.workers = 3;
    const auto b = born_trials({1.0, 1.0, 0.0}, p, g, 3, 11, o);
    CHECK(a.trials == 3);
    CHECK(a.counts[0] + a.counts[1] + a.counts[2] + a.unresolved == 3);
    CHECK(a.frequency[0] + a.frequency[1] + a.frequency[2] <= 1.0 + 1e-15);
    CHECK(a.target[0] == doctest::Approx(0.5));
    CHECK(a.target[2] == 0.0);
    CHECK(a.period == doctest::Approx(4.0 * kPi));
    REQUIRE(a.log.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(a.log[k].t0 == b.log[k].t0);
        CHECK(a.log[k].seed == b.log[k].seed);
        CHECK(a.log[k].fidelity == b.log[k].fidelity);
        CHECK(a.log[k].t0 >= 0.0);
        CHECK(a.log[k].t0 < a.period);
    }
    CHECK(a.counts == b.counts);
    CHECK_THROWS(born_trials({0.0, 0.0, 0.0}, p, g, 3, 11, o));
}
