#include "sqh/sde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sqh/closure.hpp"
#include "sqh/parallel.hpp"
#include "sqh/rng.hpp"

namespace sqh::sde {

namespace {

void validate(const SdeOptions& opt)
{
    if (opt.n_traj == 0) throw std::invalid_argument("n_traj must be positive");
    if (!(opt.dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(opt.t_end >= 0.0)) throw std::invalid_argument("t_end must be >= 0");
    if (opt.resample_every == 0) throw std::invalid_argument("resample_every must be positive");
    if (!(opt.closure.bandwidth_scale > 0.0)) throw std::invalid_argument("bandwidth_scale must be positive");
    if (opt.closure.order < 2 || opt.closure.order > 12) throw std::invalid_argument("closure order must be in [2, 12]");
}

Moments particle_moments(const std::vector<double>& q, double t)
{
    double m = 0.0;
    for (double v : q) m += v;
    m /= static_cast<double>(q.size());
    double s = 0.0;
    for (double v : q) s += (v - m) * (v - m);
    return {t, m, s / static_cast<double>(q.size())};
}

bool drift_is_zero(const PotentialSpec& V, bool quantum) { return !quantum && V.kind == PotentialSpec::Kind::free; }

std::size_t step_count(const SdeOptions& opt) { return static_cast<std::size_t>(std::llround(opt.t_end / opt.dt)); }

// Shared driver: `refresh` rebuilds force tables from the current estimate,
// `advance` moves particle i through step k.
template <class Refresh, class Advance>
void run_ensemble(const Grid1D& g, const SdeOptions& opt, std::vector<double>& q, SdeResult& out, Refresh&& refresh,
                  Advance&& advance)
{
    const std::size_t steps = step_count(opt);
    std::vector<std::uint8_t> reflected(q.size(), 0);
    auto estimate = [&](std::size_t k, bool keep) {
        const double t = static_cast<double>(k) * opt.dt;
        DensityEstimate est = estimate_density(q, g, opt.closure);
        if (est.clipped) ++out.clip_events;
        out.moments.push_back(particle_moments(q, t));
        refresh(est);
        if (keep) out.snapshots.push_back({t, std::move(est.density)});
    };
    estimate(0, true);
    for (std::size_t k = 0; k < steps; ++k) {
        parallel_for(q.size(), opt.workers, [&](std::size_t i) { reflected[i] = advance(i, k); });
        for (std::uint8_t r : reflected) out.reflections += r;
        const std::size_t done = k + 1;
        const bool last = done == steps;
        const bool snap = last || (opt.snapshot_every > 0 && done % opt.snapshot_every == 0);
        if (snap || done % opt.resample_every == 0) estimate(done, snap);
    }
    out.steps = steps;
    out.positions = q;
}

}  // namespace

DriftTable DriftTable::from_drift(const Field& K) { return {K, numerics::derivative(K, 1)}; }

double reflect(double q, const Grid1D& g, bool& reflected)
{
    if (!std::isfinite(q)) throw std::runtime_error("particle position is not finite");
    if (q >= g.q_min && q <= g.q_max) return q;
    reflected = true;
    // unfold onto a circle of twice the span, then mirror the upper half
    const double span = g.q_max - g.q_min;
    double u = std::fmod(q - g.q_min, 2.0 * span);
    if (u < 0.0) u += 2.0 * span;
    return g.q_min + (u <= span ? u : 2.0 * span - u);
}

StepResult step_overdamped(double q, const DriftTable& drift, const PhysicalParams& p, double dt, double xi,
                           bool second_order)
{
    const double K = numerics::interpolate(drift.K, q);
    double next = q + K * dt + std::sqrt(2.0 * p.diffusion * dt) * xi;
    if (second_order) next += 0.5 * numerics::interpolate(drift.dK, q) * K * dt * dt;
    StepResult r;
    r.q = reflect(next, drift.K.grid, r.reflected);
    return r;
}

std::vector<double> sample_inverse_cdf(const DensityField& n, std::size_t count, std::uint64_t seed)
{
    const Grid1D& g = n.grid;
    std::vector<double> cdf(g.n_points, 0.0);
    for (std::size_t i = 1; i < g.n_points; ++i)
        cdf[i] = cdf[i - 1] + 0.5 * g.dq() * (std::max(n.values[i - 1], 0.0) + std::max(n.values[i], 0.0));
    const double total = cdf.back();
    if (!(total > 0.0)) throw std::invalid_argument("cannot sample from a density with zero mass");
    std::vector<double> q(count);
    for (std::size_t s = 0; s < count; ++s) {
        const double u = rng::CounterRng(seed, s).uniform(0) * total;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        std::size_t i = static_cast<std::size_t>(std::distance(cdf.begin(), it));
        i = std::clamp<std::size_t>(i, 1, g.n_points - 1);
        const double lo = cdf[i - 1], hi = cdf[i];
        const double frac = hi > lo ? (u - lo) / (hi - lo) : 0.5;
        q[s] = g.x(i - 1) + frac * g.dq();
    }
    return q;
}

namespace {

std::vector<double> smoothed_histogram(const std::vector<double>& q, const Grid1D& g, double h)
{
    const double dq = g.dq();
    const std::size_t n = g.n_points;
    std::vector<double> hist(n, 0.0);
    for (double x : q) {
        const double u = std::clamp((x - g.q_min) / dq, 0.0, static_cast<double>(n - 1));
        const auto i = std::min(static_cast<std::size_t>(u), n - 2);
        const double fr = u - static_cast<double>(i);
        hist[i] += 1.0 - fr;
        hist[i + 1] += fr;
    }
    if (h < 0.5 * dq) return hist;
    const auto half = static_cast<std::size_t>(std::ceil(5.0 * h / dq));
    std::vector<double> w(2 * half + 1);
    double ws = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double d = (static_cast<double>(k) - static_cast<double>(half)) * dq / h;
        w[k] = std::exp(-0.5 * d * d);
        ws += w[k];
    }
    for (double& v : w) v /= ws;
    std::vector<double> smooth(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (hist[i] == 0.0) continue;
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        for (std::size_t j = lo; j <= hi; ++j) smooth[j] += hist[i] * w[j + half - i];
    }
    return smooth;
}

}  // namespace

DensityEstimate estimate_density(const std::vector<double>& q, const Grid1D& g, const ClosureSpec& spec)
{
    if (q.empty()) throw std::invalid_argument("density estimate of an empty ensemble");
    DensityEstimate out;
    if (spec.kind == Closure::hermite) {
        out.series = closure::hermite_series(q, spec.order);
        closure::Smoothed sm = closure::evaluate(*out.series, g);
        out.density = std::move(sm.density);
        out.clipped = sm.clipped;
        return out;
    }
    const Moments m = particle_moments(q, 0.0);
    out.bandwidth =
        spec.bandwidth_scale * 1.06 * std::sqrt(m.variance) * std::pow(static_cast<double>(q.size()), -0.2);
    std::vector<double> v = smoothed_histogram(q, g, out.bandwidth);
    out.density = numerics::normalize(Field(g, std::move(v)));
    return out;
}

double SdeResult::reflection_rate() const
{
    const double events = static_cast<double>(steps) * static_cast<double>(positions.size());
    return events > 0.0 ? static_cast<double>(reflections) / events : 0.0;
}

SdeResult simulate_mean_field(const DensityField& n0, const PotentialSpec& V, const PhysicalParams& p,
                              const SdeOptions& opt)
{
    validate(opt);
    const Grid1D& g = n0.grid;
    SdeResult out;
    std::vector<double> q = sample_inverse_cdf(n0, opt.n_traj, opt.seed);
    DriftTable table{Field(g), Field(g)};
    const qpotential::Options qopt{.quantum = opt.quantum, .support_rel = opt.quantum_support};
    const double noise = std::sqrt(2.0 * p.diffusion * opt.dt);

    auto refresh = [&](const DensityEstimate& est) {
        if (drift_is_zero(V, opt.quantum)) return;
        if (est.series && opt.quantum)
            table = DriftTable::from_drift(closure::drift(*est.series, g, V, p, opt.quantum_support));
        else
            table = DriftTable::from_drift(qpotential::drift(est.density, V, p, qopt).field);
    };
    auto advance = [&](std::size_t i, std::size_t k) -> std::uint8_t {
        const double xi = noise > 0.0 ? rng::CounterRng(opt.seed, i).normal(k + 1) : 0.0;
        const StepResult r = step_overdamped(q[i], table, p, opt.dt, xi, opt.second_order_drift);
        q[i] = r.q;
        return r.reflected;
    };
    run_ensemble(g, opt, q, out, refresh, advance);
    return out;
}

UnderdampedResult simulate_underdamped(const DensityField& n0, const PotentialSpec& V, const PhysicalParams& p,
                                       const SdeOptions& opt)
{
    validate(opt);
    if (p.beta > 0.0 && opt.dt > 0.05 / p.beta) throw std::invalid_argument("underdamped dt must be <= 0.05/beta");
    const Grid1D& g = n0.grid;
    UnderdampedResult out;
    std::vector<double> q = sample_inverse_cdf(n0, opt.n_traj, opt.seed);
    std::vector<double> v(q.size(), 0.0);
    Field accel(g);
    const qpotential::Options qopt{.quantum = opt.quantum, .support_rel = opt.quantum_support};
    const double decay = std::exp(-p.beta * opt.dt);
    const double kick = std::sqrt(p.beta * p.diffusion * (1.0 - decay * decay));

    auto refresh = [&](const DensityEstimate& est) {
        if (drift_is_zero(V, opt.quantum)) return;
        if (est.series && opt.quantum)
            accel = closure::acceleration(*est.series, g, V, p, opt.quantum_support);
        else
            accel = qpotential::acceleration(est.density, V, p, qopt).field;
    };
    auto advance = [&](std::size_t i, std::size_t k) -> std::uint8_t {
        const double h = 0.5 * opt.dt;
        double x = q[i], u = v[i];
        bool refl = false;
        u += h * numerics::interpolate(accel, x);
        x += h * u;
        if (kick > 0.0) u = decay * u + kick * rng::CounterRng(opt.seed, i).normal(k + 1);
        else u *= decay;
        x += h * u;
        const double y = reflect(x, g, refl);
        if (refl && std::abs(y - x) > 0.0) {
            // a single mirror flips the velocity; a double mirror restores it
            const double span = g.q_max - g.q_min;
            const long flips = static_cast<long>(std::floor((std::abs(x - std::clamp(x, g.q_min, g.q_max))) / span)) + 1;
            if (flips % 2 == 1) u = -u;
        }
        x = y;
        u += h * numerics::interpolate(accel, x);
        q[i] = x;
        v[i] = u;
        return refl;
    };
    run_ensemble(g, opt, q, out, refresh, advance);
    out.velocities = v;
    return out;
}

}  // namespace sqh::sde
