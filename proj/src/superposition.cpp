#include "sqh/superposition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "sqh/oscillator.hpp"
#include "sqh/parallel.hpp"
#include "sqh/rng.hpp"

namespace sqh::superposition {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

double osc_length(const PhysicalParams& p) { return std::sqrt(p.hbar / (p.mass * p.omega)); }

std::array<std::complex<double>, kModes> mode_factors(const SuperpositionSpec& s, const PhysicalParams& p)
{
    std::array<std::complex<double>, kModes> out{};
    for (int j = 0; j < kModes; ++j) {
        const double phase = (2.0 * j + 1.0) * p.omega * (s.tau[j] - 0.5 * s.t0);
        out[j] = s.coef[j].value() * std::polar(1.0, phase);
    }
    return out;
}

// A, A', A'' in ξ.
struct Poly {
    std::complex<double> a, a1, a2;
};

Poly poly(const std::array<std::complex<double>, kModes>& m, double xi)
{
    return {m[0] + m[1] * (kSqrt2 * xi) + m[2] * ((2.0 * xi * xi - 1.0) / kSqrt2),
            m[1] * kSqrt2 + m[2] * (2.0 * kSqrt2 * xi), m[2] * (2.0 * kSqrt2)};
}

void validate(const SuperpositionSpec& s)
{
    for (const auto& c : s.coef)
        if (!(c.magnitude >= 0.0) || !std::isfinite(c.magnitude) || !std::isfinite(c.phase))
            throw std::invalid_argument("coefficient magnitudes must be finite and >= 0");
    if (!(s.weight_sum() > 0.0)) throw std::invalid_argument("superposition needs a nonzero coefficient");
    if (!std::isfinite(s.t0)) throw std::invalid_argument("t0 must be finite");
}

}  // namespace

SuperpositionSpec SuperpositionSpec::from_magnitudes(double a, double b, double c, double t0)
{
    SuperpositionSpec s;
    s.coef = {Coefficient{a, 0.0}, Coefficient{b, 0.0}, Coefficient{c, 0.0}};
    s.t0 = t0;
    return s;
}

double SuperpositionSpec::weight_sum() const
{
    double w = 0.0;
    for (const auto& c : coef) w += c.magnitude * c.magnitude;
    return w;
}

int SuperpositionSpec::lowest_mode() const
{
    for (int j = 0; j < kModes; ++j)
        if (coef[j].magnitude > 0.0) return j;
    return -1;
}

std::complex<double> amplitude(const SuperpositionSpec& s, const PhysicalParams& p, double xi)
{
    return poly(mode_factors(s, p), xi).a;
}

DensityField initial_density(const SuperpositionSpec& s, const PhysicalParams& p, const Grid1D& g)
{
    validate(s);
    const auto m = mode_factors(s, p);
    const double L = osc_length(p);
    return numerics::normalize(numerics::sample(g, [&](double q) {
        const double xi = q / L;
        return std::exp(-xi * xi) * std::norm(poly(m, xi).a);
    }));
}

qpotential::MaskedField initial_velocity(const SuperpositionSpec& s, const PhysicalParams& p, const Grid1D& g,
                                         double node_tol)
{
    validate(s);
    if (!(p.beta > 0.0)) throw std::invalid_argument("deterministic limit has no overdamped drift (beta = 0)");
    const auto m = mode_factors(s, p);
    const double L = osc_length(p);
    const double pref = p.hbar * p.hbar / (4.0 * p.mass * p.mass * p.beta * L * L * L);

    std::vector<double> P(g.n_points);
    double pmax = 0.0;
    for (std::size_t i = 0; i < g.n_points; ++i) {
        P[i] = std::norm(poly(m, g.x(i) / L).a);
        pmax = std::max(pmax, P[i]);
    }
    qpotential::MaskedField out{Field(g), std::vector<std::uint8_t>(g.n_points, 0)};
    for (std::size_t i = 0; i < g.n_points; ++i) {
        if (!(P[i] >= node_tol * pmax)) continue;
        const double xi = g.x(i) / L;
        const Poly a = poly(m, xi);
        const double p0 = P[i];
        const double p1 = 2.0 * std::real(a.a1 * std::conj(a.a));
        const double p2 = 2.0 * std::real(a.a2 * std::conj(a.a)) + 2.0 * std::norm(a.a1);
        const double p3 = 6.0 * std::real(a.a2 * std::conj(a.a1));
        const double l1 = p1 / p0;
        const double l2 = p2 / p0 - l1 * l1;
        const double l3 = p3 / p0 - 3.0 * p2 * p1 / (p0 * p0) + 2.0 * l1 * l1 * l1;
        // ln n₁ = −ξ²: (ln n₁)' = −2ξ, (ln n₁)'' = −2
        const double G = l3 + l1 * l2 - 2.0 * l1 - 2.0 * xi * l2;
        out.field.values[i] = pref * G;
        out.valid[i] = 1;
    }
    return out;
}

double bhattacharyya(const DensityField& a, const DensityField& b)
{
    if (!(a.grid == b.grid)) throw std::invalid_argument("bhattacharyya: grid mismatch");
    const double ia = numerics::integrate(a), ib = numerics::integrate(b);
    if (!(ia > 0.0) || !(ib > 0.0)) throw std::invalid_argument("bhattacharyya: density with zero mass");
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        r[i] = std::sqrt(std::max(a.values[i], 0.0) * std::max(b.values[i], 0.0));
    return std::min(1.0, numerics::integrate(a.grid, r) / std::sqrt(ia * ib));
}

Solver parse_solver(const std::string& name)
{
    if (name == "ptf") return Solver::ptf;
    if (name == "sde") return Solver::sde;
    throw std::invalid_argument("unknown solver '" + name + "' (expected ptf or sde)");
}

std::string to_string(Solver s) { return s == Solver::ptf ? "ptf" : "sde"; }

std::array<DensityField, kModes> candidates(const PhysicalParams& p, const Grid1D& g)
{
    std::array<DensityField, kModes> out;
    for (int j = 0; j < kModes; ++j) out[j] = oscillator::quasi_eigenstate(j, p, g).density;
    return out;
}

std::array<double, kModes> fidelities(const DensityField& n, const std::array<DensityField, kModes>& cand)
{
    std::array<double, kModes> f{};
    for (int j = 0; j < kModes; ++j) f[j] = bhattacharyya(n, cand[j]);
    return f;
}

int classify(const std::array<double, kModes>& fidelity)
{
    const auto it = std::max_element(fidelity.begin(), fidelity.end());
    return *it >= kClassifyThreshold ? static_cast<int>(it - fidelity.begin()) : -1;
}

RelaxationOutcome relax(const SuperpositionSpec& s, const PhysicalParams& p, const Grid1D& g, const RelaxOptions& opt,
                        const std::array<DensityField, kModes>* cand)
{
    if (!(opt.dt > 0.0) || !(opt.t_end > 0.0)) throw std::invalid_argument("relax needs dt > 0 and t_end > 0");
    if (opt.snapshots < 2) throw std::invalid_argument("relax needs at least 2 checkpoints");
    std::array<DensityField, kModes> own;
    if (!cand) {
        own = candidates(p, g);
        cand = &own;
    }
    const DensityField n0 = initial_density(s, p, g);
    const auto V = qpotential::PotentialSpec::harmonic(p.omega);
    const auto steps = static_cast<std::size_t>(std::llround(opt.t_end / opt.dt));
    const std::size_t every = std::max<std::size_t>(1, steps / opt.snapshots);

    std::vector<double> times;
    std::vector<DensityField> snaps;
    bool settled = false;
    std::ostringstream diag;
    if (opt.solver == Solver::ptf) {
        ptf::EvolveOptions eo;
        eo.dt = opt.dt;
        eo.t_end = opt.t_end;
        eo.save_every = every;
        eo.stationarity_eps = opt.stationarity_eps;
        eo.step = opt.ptf_step;
        ptf::EvolutionRecord rec = ptf::evolve(n0, V, p, eo);
        times = std::move(rec.times);
        snaps = std::move(rec.snapshots);
        settled = rec.stationary;
        diag << "steps=" << rec.steps << " nonconverged_steps=" << rec.nonconverged_steps;
        if (rec.stationary) diag << " stationary_at=" << numerics::fmt_double(rec.stationary_time);
    } else {
        sde::SdeOptions so;
        so.n_traj = opt.n_traj;
        so.dt = opt.dt;
        so.t_end = opt.t_end;
        so.seed = opt.seed;
        so.snapshot_every = every;
        so.closure = opt.sde_closure;
        so.workers = opt.workers;
        sde::SdeResult r = sde::simulate_mean_field(n0, V, p, so);
        for (auto& sn : r.snapshots) {
            times.push_back(sn.t);
            snaps.push_back(std::move(sn.density));
        }
        diag << "steps=" << r.steps << " reflections=" << r.reflections;
    }
    const std::size_t last = snaps.size() - 1;
    const double tail_l1 = last > 0 ? numerics::l1_distance(snaps[last], snaps[last - 1]) : 0.0;
    if (!settled) settled = tail_l1 <= opt.converge_l1;
    diag << " tail_l1=" << numerics::fmt_double(tail_l1);

    RelaxationOutcome out;
    out.final_density = snaps[last];
    out.fidelity = fidelities(out.final_density, *cand);
    out.converged = settled;
    out.classified = settled ? classify(out.fidelity) : -1;
    if (!settled) diag << " not settled";
    // earliest checkpoint after which the class no longer changes
    out.relaxation_time = times[last];
    for (std::size_t k = last + 1; k-- > 0;) {
        if (classify(fidelities(snaps[k], *cand)) != out.classified) break;
        out.relaxation_time = times[k];
    }
    out.diagnostics = diag.str();
    return out;
}

Interval wilson(std::size_t successes, std::size_t n, double z)
{
    if (n == 0) return {0.0, 1.0};
    const double N = static_cast<double>(n);
    const double ph = static_cast<double>(successes) / N;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / N;
    const double centre = (ph + z2 / (2.0 * N)) / denom;
    const double half = z * std::sqrt(ph * (1.0 - ph) / N + z2 / (4.0 * N * N)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double cycle_period(const SuperpositionSpec& s, const PhysicalParams& p)
{
    const int j = s.lowest_mode();
    if (j < 0) throw std::invalid_argument("superposition needs a nonzero coefficient");
    const double e_min = (j + 0.5) * p.hbar * p.omega;
    return 2.0 * std::numbers::pi * p.hbar / e_min;
}

BornStats born_trials(const std::array<double, kModes>& magnitudes, const PhysicalParams& p, const Grid1D& g,
                      std::size_t n_trials, std::uint64_t seed, const BornOptions& opt)
{
    if (n_trials == 0) throw std::invalid_argument("born_trials needs N >= 1");
    const SuperpositionSpec base = SuperpositionSpec::from_magnitudes(magnitudes[0], magnitudes[1], magnitudes[2]);
    validate(base);
    BornStats st;
    st.trials = n_trials;
    st.seed = seed;
    st.period = cycle_period(base, p);
    for (int j = 0; j < kModes; ++j) st.target[j] = magnitudes[j] * magnitudes[j] / base.weight_sum();

    const auto cand = candidates(p, g);
    st.log.resize(n_trials);
    const rng::CounterRng t0_draw(seed, 0);
    parallel_for(n_trials, opt.workers, [&](std::size_t k) {
        SuperpositionSpec s = base;
        s.t0 = t0_draw.uniform(k) * st.period;
        RelaxOptions ro = opt.relax;
        ro.seed = rng::derive_seed(seed, k);
        ro.workers = 1;
        const RelaxationOutcome r = relax(s, p, g, ro, &cand);
        st.log[k] = {k, s.t0, ro.seed, r.classified, r.fidelity, r.relaxation_time, r.converged};
    });
    for (const TrialRecord& t : st.log) {
        if (t.classified < 0) ++st.unresolved;
        else ++st.counts[t.classified];
    }
    for (int j = 0; j < kModes; ++j) {
        st.frequency[j] = static_cast<double>(st.counts[j]) / static_cast<double>(n_trials);
        st.ci[j] = wilson(st.counts[j], n_trials);
    }
    return st;
}

}  // namespace sqh::superposition
