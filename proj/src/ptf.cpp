#include "sqh/ptf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "sqh/closure.hpp"

namespace sqh::ptf {

namespace {

double trap_weight(const Grid1D& g, std::size_t i)
{
    return (i == 0 || i + 1 == g.n_points) ? 0.5 * g.dq() : g.dq();
}

double sup_change(const Field& a, const Field& b, const DensityField& n)
{
    const double cut = kSupportRel * n.max();
    double m = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i)
        if (n.values[i] > cut) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

}  // namespace

Field kernel_drift(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, const KernelOptions& opt)
{
    if (opt.density == DriftDensity::grid || !opt.qpot.quantum)
        return qpotential::drift(n, V, p, opt.qpot).field;
    const closure::HermiteSeries hs = closure::hermite_series(n, opt.closure_order);
    return closure::drift(hs, n.grid, V, p, opt.closure_support);
}

double TransitionKernel::at(std::size_t dest, std::size_t src) const
{
    if (dest < lo[src] || dest >= lo[src] + width[src]) return 0.0;
    return values[offset[src] + (dest - lo[src])];
}

double TransitionKernel::column_integral(std::size_t src) const
{
    double s = 0.0;
    for (std::size_t r = 0; r < width[src]; ++r) s += trap_weight(grid, lo[src] + r) * values[offset[src] + r];
    return s;
}

double TransitionKernel::column_mean(std::size_t src) const
{
    double s = 0.0, m = 0.0;
    for (std::size_t r = 0; r < width[src]; ++r) {
        const double w = trap_weight(grid, lo[src] + r) * values[offset[src] + r];
        s += w;
        m += w * grid.x(lo[src] + r);
    }
    return m / s;
}

double TransitionKernel::column_std(std::size_t src) const
{
    const double mu = column_mean(src);
    double s = 0.0, v = 0.0;
    for (std::size_t r = 0; r < width[src]; ++r) {
        const double w = trap_weight(grid, lo[src] + r) * values[offset[src] + r];
        const double d = grid.x(lo[src] + r) - mu;
        s += w;
        v += w * d * d;
    }
    return std::sqrt(v / s);
}

std::vector<double> TransitionKernel::dense() const
{
    const std::size_t n = grid.n_points;
    std::vector<double> out(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t r = 0; r < width[j]; ++r) out[(lo[j] + r) * n + j] = values[offset[j] + r];
    return out;
}

TransitionKernel kernel_from_drift(const Field& drift, const PhysicalParams& p, double dt, const KernelOptions& opt)
{
    if (!(p.diffusion > 0.0)) throw std::invalid_argument("D = 0: use deterministic-limit kernel");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    const Grid1D& g = drift.grid;
    const std::size_t n = g.n_points;
    const double dq = g.dq();

    TransitionKernel K;
    K.grid = g;
    K.dt = dt;
    K.sigma = std::sqrt(2.0 * p.diffusion * dt);
    K.drift = drift;
    K.source_drift = drift;
    K.lo.resize(n);
    K.width.resize(n);
    K.offset.resize(n);
    const double reach = kBandSigmas * K.sigma;
    const double delta = dq / K.sigma;
    const double step_decay = std::exp(-delta * delta);

    Field dK;
    if (opt.second_order) dK = numerics::derivative(drift, 1);

    for (std::size_t j = 0; j < n; ++j) {
        const double v = drift.values[j];
        double c = g.x(j) + v * dt;
        if (opt.second_order) c += 0.5 * dK.values[j] * v * dt * dt;
        c = std::clamp(c, g.q_min, g.q_max);
        const double lo_f = std::ceil((c - reach - g.q_min) / dq);
        const double hi_f = std::floor((c + reach - g.q_min) / dq);
        std::size_t lo = static_cast<std::size_t>(std::max(0.0, lo_f));
        std::size_t hi = static_cast<std::size_t>(std::min(static_cast<double>(n - 1), std::max(hi_f, 0.0)));
        const auto nearest = static_cast<std::size_t>(std::lround((c - g.q_min) / dq));
        if (hi < lo) lo = hi = nearest;

        K.lo[j] = lo;
        K.width[j] = hi - lo + 1;
        K.offset[j] = K.values.size();
        // exp(−d²/2) along the column by the recurrence e_{i+1} = e_i r_i, r_{i+1} = r_i e^{−δ²}
        const double d0 = (g.x(lo) - c) / K.sigma;
        double e = std::exp(-0.5 * d0 * d0);
        double r = std::exp(-(d0 * delta + 0.5 * delta * delta));
        double sum = 0.0;
        for (std::size_t i = lo; i <= hi; ++i) {
            K.values.push_back(e);
            sum += trap_weight(g, i) * e;
            e *= r;
            r *= step_decay;
        }
        if (!(sum > 0.0)) {
            // narrower than the grid: all mass on the nearest node
            std::fill(K.values.begin() + static_cast<long>(K.offset[j]), K.values.end(), 0.0);
            K.values[K.offset[j] + (nearest - lo)] = 1.0;
            sum = trap_weight(g, nearest);
        }
        for (std::size_t i = K.offset[j]; i < K.values.size(); ++i) K.values[i] /= sum;
    }
    return K;
}

TransitionKernel kernel_zero(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, double dt,
                             const KernelOptions& opt)
{
    if (!(p.diffusion > 0.0)) throw std::invalid_argument("D = 0: use deterministic-limit kernel");
    return kernel_from_drift(kernel_drift(n, V, p, opt), p, dt, opt);
}

DensityField propagate(const DensityField& n, const TransitionKernel& K)
{
    if (!(n.grid == K.grid)) throw std::invalid_argument("propagate: grid mismatch");
    std::vector<double> out(n.size(), 0.0);
    for (std::size_t j = 0; j < n.size(); ++j) {
        const double a = n.values[j] * trap_weight(n.grid, j);
        if (a == 0.0) continue;
        const double* col = K.values.data() + K.offset[j];
        double* dst = out.data() + K.lo[j];
        for (std::size_t r = 0; r < K.width[j]; ++r) dst[r] += a * col[r];
    }
    return numerics::normalize(Field(n.grid, std::move(out)));
}

TransitionKernel refine(const TransitionKernel& K_prev, const DensityField& n_now, const PotentialSpec& V,
                        const PhysicalParams& p, const KernelOptions& opt)
{
    const Field d_now = kernel_drift(n_now, V, p, opt);
    Field mid(K_prev.grid);
    for (std::size_t i = 0; i < mid.size(); ++i)
        mid.values[i] = 0.5 * (d_now.values[i] + K_prev.source_drift.values[i]);
    TransitionKernel K = kernel_from_drift(mid, p, K_prev.dt, opt);
    K.source_drift = K_prev.source_drift;
    K.order = K_prev.order + 1;
    return K;
}

namespace {

StepResult step_once(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, double dt,
                     const StepOptions& opt)
{
    TransitionKernel K = kernel_zero(n, V, p, dt, opt.kernel);
    StepResult out;
    out.density = propagate(n, K);
    out.iterations = 1;
    if (std::isinf(opt.tol)) {
        out.converged = true;
        return out;
    }
    // x: density the next drift is evaluated on; G(x) = propagate with that drift.
    DensityField x = out.density;
    std::vector<double> x_prev, f_prev;
    // Propagated density whose drift changed least on refinement; returned when
    // the iteration stops unconverged, so a diverging refinement cannot
    // replace a good iterate with a wild one.
    DensityField best = out.density;
    double best_norm = std::numeric_limits<double>::infinity();
    while (out.iterations < opt.max_refine) {
        TransitionKernel next = refine(K, x, V, p, opt.kernel);
        const double change = sup_change(next.drift, K.drift, out.density);
        out.norms.push_back(change);
        if (change <= opt.tol) {
            out.converged = true;
            return out;
        }
        if (change < best_norm) {
            best_norm = change;
            best = out.density;
        } else if (change > kDivergence * best_norm) {
            break;
        }
        K = std::move(next);
        out.density = propagate(n, K);
        ++out.iterations;
        if (!opt.accelerate) {
            x = out.density;
            continue;
        }
        const std::size_t N = x.size();
        std::vector<double> f(N);
        for (std::size_t i = 0; i < N; ++i) f[i] = out.density.values[i] - x.values[i];
        double gamma = 0.0;
        if (!f_prev.empty()) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double df = f[i] - f_prev[i];
                num += df * f[i];
                den += df * df;
            }
            if (den > 0.0) gamma = num / den;
        }
        std::vector<double> x_new(N);
        for (std::size_t i = 0; i < N; ++i) {
            double v = x.values[i] + f[i];
            if (gamma != 0.0) v -= gamma * (x.values[i] - x_prev[i] + f[i] - f_prev[i]);
            x_new[i] = std::max(v, 0.0);
        }
        x_prev = x.values;
        f_prev = std::move(f);
        x.values = std::move(x_new);
    }
    out.density = std::move(best);
    return out;
}

StepResult step_split(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, double dt,
                      const StepOptions& opt, int depth)
{
    StepResult r = step_once(n, V, p, dt, opt);
    if (r.converged || depth >= opt.max_halvings) return r;
    StepResult a = step_split(n, V, p, 0.5 * dt, opt, depth + 1);
    StepResult b = step_split(a.density, V, p, 0.5 * dt, opt, depth + 1);
    b.iterations = std::max(a.iterations, b.iterations);
    b.converged = a.converged && b.converged;
    b.substeps += a.substeps;
    return b;
}

}  // namespace

StepResult step(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, double dt,
                const StepOptions& opt)
{
    if (opt.max_refine < 1) throw std::invalid_argument("max_refine must be >= 1");
    if (opt.max_halvings < 0) throw std::invalid_argument("max_halvings must be >= 0");
    return step_split(n, V, p, dt, opt, 0);
}

double EvolutionRecord::monotone_fraction() const
{
    if (norms.empty()) return 1.0;
    std::size_t ok = 0;
    for (const auto& v : norms) {
        bool mono = true;
        for (std::size_t i = 1; i < v.size(); ++i) mono = mono && v[i] <= v[i - 1];
        ok += mono;
    }
    return static_cast<double>(ok) / static_cast<double>(norms.size());
}

EvolutionRecord evolve(const DensityField& n0, const PotentialSpec& V, const PhysicalParams& p,
                       const EvolveOptions& opt)
{
    if (!(opt.dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(opt.t_end >= 0.0)) throw std::invalid_argument("t_end must be >= 0");
    EvolutionRecord rec;
    DensityField n = numerics::normalize(n0);
    rec.times.push_back(0.0);
    rec.snapshots.push_back(n);
    const auto steps = static_cast<std::size_t>(std::llround(opt.t_end / opt.dt));
    bool saved_last = true;
    for (std::size_t k = 0; k < steps; ++k) {
        StepResult r = step(n, V, p, opt.dt, opt.step);
        const double change = numerics::l1_distance(r.density, n) / opt.dt;
        n = std::move(r.density);
        const double t = static_cast<double>(k + 1) * opt.dt;
        rec.iterations.push_back(r.iterations);
        rec.norms.push_back(std::move(r.norms));
        if (!r.converged) ++rec.nonconverged_steps;
        ++rec.steps;
        saved_last = false;
        if (opt.save_every > 0 && (k + 1) % opt.save_every == 0) {
            rec.times.push_back(t);
            rec.snapshots.push_back(n);
            saved_last = true;
        }
        if (change < opt.stationarity_eps && !rec.stationary) {
            rec.stationary = true;
            rec.stationary_time = t;
            if (opt.stop_when_stationary) break;
        }
    }
    if (!saved_last) {
        rec.times.push_back(static_cast<double>(rec.steps) * opt.dt);
        rec.snapshots.push_back(n);
    }
    rec.final_density = n;
    return rec;
}

void write_kernel_csv(std::ostream& os, const TransitionKernel& K)
{
    const std::size_t n = K.grid.n_points;
    if (n > 512) throw std::invalid_argument("kernel dump limited to grids of at most 512 points");
    const auto d = K.dense();
    os << "# dest rows, source columns; dt = " << numerics::fmt_double(K.dt) << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j) os << ',';
            os << numerics::fmt_double(d[i * n + j]);
        }
        os << '\n';
    }
}

}  // namespace sqh::ptf
