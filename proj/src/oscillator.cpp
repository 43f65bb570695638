#include "sqh/oscillator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>

#include "sqh/qpotential.hpp"

namespace sqh::oscillator {

namespace {

double length_scale(const PhysicalParams& p) { return std::sqrt(p.hbar / (p.mass * p.omega)); }

// 4-point Lagrange interpolation on a uniform table starting at x = 0.
double table_cubic(const std::vector<double>& v, double h, double x)
{
    const double u = x / h;
    long i = static_cast<long>(std::floor(u)) - 1;
    i = std::clamp<long>(i, 0, static_cast<long>(v.size()) - 4);
    const double t = u - static_cast<double>(i);
    const double y0 = v[i], y1 = v[i + 1], y2 = v[i + 2], y3 = v[i + 3];
    return y0 * (t - 1) * (t - 2) * (t - 3) / -6.0 + y1 * t * (t - 2) * (t - 3) / 2.0 +
           y2 * t * (t - 1) * (t - 3) / -2.0 + y3 * t * (t - 1) * (t - 2) / 6.0;
}

double lagrange4(const double* xs, const double* ys, double x)
{
    double s = 0.0;
    for (int a = 0; a < 4; ++a) {
        double l = 1.0;
        for (int b = 0; b < 4; ++b)
            if (b != a) l *= (x - xs[b]) / (xs[a] - xs[b]);
        s += l * ys[a];
    }
    return s;
}

}  // namespace

double hermite(int k, double x)
{
    if (k < 0) throw std::invalid_argument("hermite index must be >= 0");
    if (k == 0) return 1.0;
    double hm = 1.0, h = 2.0 * x;
    for (int n = 2; n <= k; ++n) {
        const double next = 2.0 * x * h - 2.0 * (n - 1) * hm;
        hm = h;
        h = next;
    }
    return h;
}

std::vector<double> hermite_nonnegative_roots(int k)
{
    std::vector<double> roots;
    if (k <= 0) return roots;
    if (k % 2 == 1) roots.push_back(0.0);
    const double step = 1e-3;
    const double top = std::sqrt(2.0 * k + 1.0) + 1.0;
    double x0 = step, f0 = hermite(k, x0);
    for (double x1 = x0 + step; x1 <= top; x1 += step) {
        const double f1 = hermite(k, x1);
        if (f0 == 0.0) {
            roots.push_back(x0);
        } else if ((f0 < 0.0) != (f1 < 0.0)) {
            boost::uintmax_t iters = 200;
            auto r = boost::math::tools::toms748_solve([k](double x) { return hermite(k, x); }, x0, x1, f0, f1,
                                                       boost::math::tools::eps_tolerance<double>(52), iters);
            roots.push_back(0.5 * (r.first + r.second));
        }
        x0 = x1;
        f0 = f1;
    }
    return roots;
}

Eigenstate eigenstate(int j, const PhysicalParams& p, const Grid1D& g)
{
    if (j < 0) throw std::invalid_argument("eigenstate index must be >= 0");
    const double s0 = length_scale(p);
    const double norm = 1.0 / (std::pow(2.0, j) * std::tgamma(j + 1.0) * std::sqrt(std::numbers::pi) * s0);
    const Field raw = numerics::sample(g, [&](double q) {
        const double x = q / s0;
        const double h = hermite(j, x);
        return norm * h * h * std::exp(-x * x);
    });
    const auto r = numerics::normalize_checked(raw);
    Eigenstate e;
    e.j = j;
    e.density = r.density;
    e.truncated = r.truncated;
    e.energy = (j + 0.5) * p.hbar * p.omega;
    e.second_moment = numerics::moment(e.density, 2);
    e.width2 = 2.0 * e.second_moment;
    return e;
}

BernoulliResult bernoulli_f(int j, const PhysicalParams& p, const Grid1D& g, const BernoulliOptions& opt)
{
    if (j < 0) throw std::invalid_argument("bernoulli_f index must be >= 0");
    const double s0 = length_scale(p);
    BernoulliResult out{Field(g), Field(g), hermite_nonnegative_roots(j), 0.0};
    if (j == 0) return out;

    const bool printed = opt.form == BernoulliForm::as_printed;
    const double dx = g.dq() / s0;
    const double h = dx / opt.refine;
    const double X = std::max(std::abs(g.q_min), std::abs(g.q_max)) / s0 + 8.0 * dx;
    // The regular solution is fixed by a condition at infinity; carry the table
    // well past the grid so the far tail does not feed back.
    const double X_end = printed ? X : X + 4.0;
    const auto M = static_cast<std::size_t>(std::ceil(X_end / h)) + 4;

    // (μ f')' = μ S with μ = H² e^{−x²}.
    //   printed:    S = 8 ln|H| + 4j x H_{j−1}/H
    //   stationary: S = 4κ − 8 ln|H| + 8j x H_{j−1}/H, κ chosen so ∫_0^∞ μ S = 0
    std::vector<double> mu(M), ms(M);
    for (std::size_t k = 0; k < M; ++k) {
        const double x = k * h;
        const double H = hermite(j, x);
        const double Hm = hermite(j - 1, x);
        const double e = std::exp(-x * x);
        const double lg = H == 0.0 ? 0.0 : H * H * std::log(std::abs(H));
        mu[k] = H * H * e;
        ms[k] = printed ? (8.0 * lg + 4.0 * j * x * Hm * H) * e : (-8.0 * lg + 8.0 * j * x * Hm * H) * e;
    }
    auto trap = [h](const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t k = 1; k < v.size(); ++k) s += 0.5 * h * (v[k - 1] + v[k]);
        return s;
    };
    if (!printed) {
        out.kappa = -trap(ms) / (4.0 * trap(mu));
        for (std::size_t k = 0; k < M; ++k) ms[k] += 4.0 * out.kappa * mu[k];
    }

    // f' = N/μ with N the integral from 0; past the outermost node the
    // stationary form uses −(integral to the end) to avoid cancellation.
    std::vector<double> N(M, 0.0), T(M, 0.0), fp(M, 0.0), f(M, 0.0);
    for (std::size_t k = 1; k < M; ++k) N[k] = N[k - 1] + 0.5 * h * (ms[k - 1] + ms[k]);
    for (std::size_t k = M - 1; k-- > 0;) T[k] = T[k + 1] + 0.5 * h * (ms[k] + ms[k + 1]);
    const double x_switch = (out.nodes.empty() ? 0.0 : out.nodes.back()) + 1.0;
    for (std::size_t k = 0; k < M; ++k) {
        const double x = k * h;
        const double H = hermite(j, x);
        if (H == 0.0) continue;
        const double num = (!printed && x > x_switch) ? -T[k] : N[k];
        fp[k] = num * std::exp(x * x) / (H * H);
    }

    // Each positive node x_n of H_j is a double pole of f': near it
    // N/μ = A/(x − x_n)² + regular, A = N(x_n) e^{x_n²} / H'(x_n)², and the 1/(x − x_n)
    // term vanishes.  The poles (and their mirrors, f' being odd) are removed,
    // the remainder integrated, and their antiderivatives added back, which is
    // the finite-part continuation of f across each node.
    std::vector<double> poles, amps;
    for (double xn : out.nodes) {
        if (xn == 0.0) continue;  // N(0) = 0 for odd j: no pole
        const double dH = 2.0 * j * hermite(j - 1, xn);
        poles.push_back(xn);
        amps.push_back(table_cubic(N, h, xn) * std::exp(xn * xn) / (dH * dH));
    }
    auto pole_fp = [&](double x) {
        double v = 0.0;
        for (std::size_t n = 0; n < poles.size(); ++n)
            v += amps[n] / ((x - poles[n]) * (x - poles[n])) - amps[n] / ((x + poles[n]) * (x + poles[n]));
        return v;
    };
    auto pole_f = [&](double x) {
        double v = 0.0;
        for (std::size_t n = 0; n < poles.size(); ++n)
            v += -amps[n] / (x - poles[n]) + amps[n] / (x + poles[n]) - 2.0 * amps[n] / poles[n];
        return v;
    };
    const double w = opt.window_cells * dx;
    auto in_window = [&](double x) {
        for (double xn : poles)
            if (std::abs(x - xn) < w) return true;
        return false;
    };
    for (std::size_t k = 0; k < M; ++k)
        if (!in_window(k * h)) fp[k] -= pole_fp(k * h);

    // Bridge the regular part through each window with a cubic through points outside it.
    auto bridge = [&](std::vector<double>& v, bool odd) {
        const std::vector<double> src = v;
        auto at = [&](double x) { return x < 0.0 ? (odd ? -1.0 : 1.0) * table_cubic(src, h, -x) : table_cubic(src, h, x); };
        for (double xn : poles) {
            // anchors kept clear of the window by the table stencil width
            const double a1 = w + 3.0 * h, a2 = 2.0 * w + 3.0 * h;
            const double xs[4] = {xn - a2, xn - a1, xn + a1, xn + a2};
            const double ys[4] = {at(xs[0]), at(xs[1]), at(xs[2]), at(xs[3])};
            const auto k0 = static_cast<std::size_t>(std::max(0.0, std::ceil((xn - w) / h)));
            for (std::size_t k = k0; k < M && k * h < xn + w; ++k) v[k] = lagrange4(xs, ys, k * h);
        }
    };
    bridge(fp, true);

    for (std::size_t k = 1; k < M; ++k) {
        f[k] = f[k - 1] + 0.5 * h * (fp[k - 1] + fp[k]);
        if (!std::isfinite(f[k]))
            throw std::runtime_error("bernoulli_f: non-integrable growth of f_" + std::to_string(j) + " at x = " +
                                     std::to_string(k * h));
    }
    for (std::size_t k = 0; k < M; ++k) {
        if (in_window(k * h)) continue;
        f[k] += pole_f(k * h);
        fp[k] += pole_fp(k * h);
    }
    bridge(f, false);
    bridge(fp, true);

    for (std::size_t i = 0; i < g.n_points; ++i) {
        const double q = g.x(i);
        const double x = std::abs(q) / s0;
        out.f.values[i] = table_cubic(f, h, x);
        const double d = table_cubic(fp, h, x);
        out.fprime.values[i] = (q < 0.0) ? -d : d;
    }
    return out;
}

double ground_inverse_width(const PhysicalParams& p)
{
    const double c = 2.0 * p.gamma * p.theta;
    return 1.0 / (std::sqrt(1.0 + c * c) + c);
}

QuasiEigenstate quasi_eigenstate(int j, const PhysicalParams& p, const Grid1D& g, const BernoulliOptions& opt)
{
    if (2.0 * p.gamma * p.theta >= 1.0) throw std::invalid_argument("quasi_eigenstate requires 2*gamma*theta < 1");
    const double s0 = length_scale(p);
    const double eps = p.gamma * p.theta;
    const double a = ground_inverse_width(p);

    QuasiEigenstate qe;
    qe.j = j;
    qe.f = Field(g);
    if (eps > 0.0 && j > 0) qe.f = bernoulli_f(j, p, g, opt).f;

    Field raw(g);
    for (std::size_t i = 0; i < g.n_points; ++i) {
        const double x = g.x(i) / s0;
        const double H = hermite(j, x);
        const double v = H * H * std::exp(-2.0 * eps * qe.f.values[i] - a * x * x);
        if (!std::isfinite(v))
            throw std::runtime_error("quasi_eigenstate: density overflow for j = " + std::to_string(j));
        raw.values[i] = v;
    }
    qe.density = numerics::normalize(raw);

    std::vector<double> w(g.n_points);
    for (std::size_t i = 0; i < g.n_points; ++i) {
        const double q = g.x(i);
        const double fv = qe.f.values[i];
        w[i] = qe.density.values[i] == 0.0 ? 0.0 : qe.density.values[i] * (q * q + 2.0 * s0 * s0 * fv);
    }
    qe.width2 = 2.0 * numerics::integrate(g, w);
    qe.width2_ref = s0 * s0 / a;
    qe.width2_first_order = s0 * s0 / (1.0 - 2.0 * eps);
    qe.delta = qe.width2 / qe.width2_ref - 1.0;
    qe.energy = (j + 0.5) * p.hbar * p.omega + p.gamma * p.kT() * (p.mass * p.omega / p.hbar) * qe.width2;

    const auto vq = qpotential::vqu(qe.density, p);
    const Field V = qpotential::PotentialSpec::harmonic(p.omega).evaluate(g, p);
    std::vector<double> e1(g.n_points, 0.0), e2(g.n_points, 0.0);
    for (std::size_t i = 0; i < g.n_points; ++i)
        if (vq.valid[i]) e1[i] = qe.density.values[i] * (V.values[i] + vq.field.values[i]);
    qe.energy_hydro = numerics::integrate(g, e1);
    for (std::size_t i = 0; i < g.n_points; ++i) {
        if (!vq.valid[i]) continue;
        const double d = V.values[i] + vq.field.values[i] - qe.energy_hydro;
        e2[i] = qe.density.values[i] * d * d;
    }
    qe.energy_spread = std::sqrt(numerics::integrate(g, e2));
    qe.energy_spread_model = j == 0 ? std::sqrt(3.0 / 8.0) * p.gamma * p.kT() : 0.0;
    return qe;
}

double gamma_from_energy_variance(double dE0, double kT)
{
    if (!(kT > 0.0)) throw std::invalid_argument("kT must be positive");
    return std::sqrt(8.0 / 3.0) * dE0 / kT;
}

double gamma_from_level_spacing(double E_gap, double dq2, double dq_j2, double dq_jm1_2, const PhysicalParams& p)
{
    const double diff = dq_j2 - dq_jm1_2;
    if (diff == 0.0) throw std::invalid_argument("degenerate width difference");
    if (!(p.kT() > 0.0)) throw std::invalid_argument("kT must be positive");
    return dq2 / diff * (E_gap - p.hbar * p.omega) / p.kT();
}

}  // namespace sqh::oscillator
