#include "sqh/closure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sqh::closure {

namespace {

void finish(std::vector<double>& c)
{
    double fact = 1.0;
    for (std::size_t k = 1; k < c.size(); ++k) {
        fact *= static_cast<double>(k);
        c[k] /= fact;
    }
}

}  // namespace

void hermite_e(double z, int K, double* out)
{
    out[0] = 1.0;
    if (K >= 1) out[1] = z;
    for (int k = 2; k <= K; ++k) out[k] = z * out[k - 1] - (k - 1) * out[k - 2];
}

HermiteSeries hermite_series(const std::vector<double>& q, int K)
{
    if (q.empty()) throw std::invalid_argument("hermite series of an empty sample");
    if (K < 0) throw std::invalid_argument("hermite series order must be >= 0");
    const double N = static_cast<double>(q.size());
    double mean = 0.0;
    for (double x : q) mean += x;
    mean /= N;
    double var = 0.0;
    for (double x : q) var += (x - mean) * (x - mean);
    var /= N;
    if (!(var > 0.0)) throw std::invalid_argument("hermite series of a degenerate sample");

    HermiteSeries s{mean, std::sqrt(var), std::vector<double>(K + 1, 0.0)};
    std::vector<double> he(K + 1);
    for (double x : q) {
        hermite_e((x - mean) / s.sd, K, he.data());
        for (int k = 0; k <= K; ++k) s.coef[k] += he[k];
    }
    for (double& c : s.coef) c /= N;
    finish(s.coef);
    return s;
}

HermiteSeries hermite_series(const DensityField& n, int K)
{
    if (K < 0) throw std::invalid_argument("hermite series order must be >= 0");
    const double mass = numerics::integrate(n);
    if (!(mass > 0.0)) throw std::invalid_argument("hermite series of a density with zero mass");
    const double mean = numerics::mean(n);
    const double var = numerics::variance(n);
    if (!(var > 0.0)) throw std::invalid_argument("hermite series of a degenerate density");

    HermiteSeries s{mean, std::sqrt(var), std::vector<double>(K + 1, 0.0)};
    std::vector<double> he(K + 1), w(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        const double tw = (i == 0 || i + 1 == n.size()) ? 0.5 : 1.0;
        hermite_e((n.grid.x(i) - mean) / s.sd, K, he.data());
        for (int k = 0; k <= K; ++k) s.coef[k] += tw * n.values[i] * he[k];
    }
    const double norm = mass / n.grid.dq();
    for (double& c : s.coef) c /= norm;
    finish(s.coef);
    return s;
}

Smoothed evaluate(const HermiteSeries& s, const Grid1D& g)
{
    const int K = static_cast<int>(s.coef.size()) - 1;
    std::vector<double> he(K + 1), out(g.n_points);
    Smoothed r;
    for (std::size_t i = 0; i < g.n_points; ++i) {
        const double z = (g.x(i) - s.mean) / s.sd;
        hermite_e(z, K, he.data());
        double v = 0.0;
        for (int k = 0; k <= K; ++k) v += s.coef[k] * he[k];
        v *= std::exp(-0.5 * z * z);
        if (v < 0.0) {
            v = 0.0;
            r.clipped = true;
        }
        out[i] = v;
    }
    r.density = numerics::normalize(numerics::Field(g, std::move(out)));
    return r;
}

qpotential::MaskedField vqu(const HermiteSeries& s, const Grid1D& g, const params::PhysicalParams& p,
                            double support_rel, double p_floor)
{
    const int K = static_cast<int>(s.coef.size()) - 1;
    if (K < 0 || !(s.coef[0] > 0.0)) throw std::invalid_argument("hermite series needs a positive c_0");
    // P and its first two derivatives, using He_k' = k He_{k−1}
    std::vector<double> he(K + 1);
    std::vector<double> P(g.n_points), P1(g.n_points), P2(g.n_points), dens(g.n_points);
    double dmax = 0.0;
    for (std::size_t i = 0; i < g.n_points; ++i) {
        const double z = (g.x(i) - s.mean) / s.sd;
        hermite_e(z, K, he.data());
        double a0 = 0.0, a1 = 0.0, a2 = 0.0;
        for (int k = 0; k <= K; ++k) {
            const double c = s.coef[k] / s.coef[0];
            a0 += c * he[k];
            if (k >= 1) a1 += c * k * he[k - 1];
            if (k >= 2) a2 += c * k * (k - 1) * he[k - 2];
        }
        P[i] = a0;
        P1[i] = a1;
        P2[i] = a2;
        dens[i] = std::exp(-0.5 * z * z) * std::max(a0, 0.0);
        dmax = std::max(dmax, dens[i]);
    }
    // Away from the core a truncated series dips towards zero and may recover
    // far out, and near such a dip u = P'/P is huge.  Only runs of
    // P >= kTailLevel that carry a real share of the density are kept.
    std::vector<std::uint8_t> tail(g.n_points, 1);
    for (std::size_t i = 0; i < g.n_points;) {
        if (P[i] < kTailLevel) {
            ++i;
            continue;
        }
        std::size_t j = i;
        double peak = 0.0;
        for (; j < g.n_points && P[j] >= kTailLevel; ++j) peak = std::max(peak, dens[j]);
        if (peak >= kCoreLevel * dmax) std::fill(tail.begin() + i, tail.begin() + j, 0);
        i = j;
    }
    const double pref = -p.hbar * p.hbar / (4.0 * p.mass * s.sd * s.sd);
    qpotential::MaskedField out{numerics::Field(g), std::vector<std::uint8_t>(g.n_points)};
    for (std::size_t i = 0; i < g.n_points; ++i) {
        const bool ok = !tail[i] && P[i] > p_floor && dens[i] > support_rel * dmax;
        out.valid[i] = ok;
        if (!ok) continue;
        const double z = (g.x(i) - s.mean) / s.sd;
        const double u = P1[i] / P[i];
        const double du = P2[i] / P[i] - u * u;
        out.field.values[i] = pref * (du - 1.0 + 0.5 * (u - z) * (u - z));
    }
    return out;
}

numerics::Field acceleration(const HermiteSeries& s, const Grid1D& g, const qpotential::PotentialSpec& V,
                             const params::PhysicalParams& p, double support_rel)
{
    return qpotential::acceleration_from(vqu(s, g, p, support_rel), V, p).field;
}

numerics::Field drift(const HermiteSeries& s, const Grid1D& g, const qpotential::PotentialSpec& V,
                      const params::PhysicalParams& p, double support_rel)
{
    if (!(p.beta > 0.0)) throw std::invalid_argument("deterministic limit has no overdamped drift (beta = 0)");
    numerics::Field a = acceleration(s, g, V, p, support_rel);
    for (double& v : a.values) v /= p.beta;
    return a;
}

}  // namespace sqh::closure
