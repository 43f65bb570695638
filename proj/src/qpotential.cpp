#include "sqh/qpotential.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sqh::qpotential {

namespace {

// Fill invalid runs: linear interpolation across interior gaps, linear
// extrapolation with the edge slope (over up to 8 valid cells) into tails,
// so forces stay continuous at the mask boundary.
void continue_from_valid(std::vector<double>& v, const std::vector<std::uint8_t>& valid)
{
    const long n = static_cast<long>(v.size());
    auto ok = [&](long i) { return i >= 0 && i < n && valid[static_cast<std::size_t>(i)]; };
    auto edge_slope = [&](long e, long dir) {
        long m = 0;
        while (m < 8 && ok(e - dir * (m + 1))) ++m;
        return m == 0 ? 0.0 : (v[e] - v[e - dir * m]) / static_cast<double>(dir * m);
    };
    if (std::none_of(valid.begin(), valid.end(), [](std::uint8_t b) { return b != 0; })) return;
    long i = 0;
    while (i < n) {
        if (ok(i)) {
            ++i;
            continue;
        }
        long b = i;
        while (b < n && !ok(b)) ++b;
        const long l = i - 1, r = b;  // bracketing valid nodes, possibly out of range
        for (long k = i; k < b; ++k) {
            if (l >= 0 && r < n) {
                const double w = static_cast<double>(k - l) / static_cast<double>(r - l);
                v[k] = (1.0 - w) * v[l] + w * v[r];
            } else if (l >= 0) {
                v[k] = v[l] + edge_slope(l, 1) * static_cast<double>(k - l);
            } else {
                v[k] = v[r] + edge_slope(r, -1) * static_cast<double>(k - r);
            }
        }
        i = b;
    }
}

// √n is |ψ|, which has a kink at every zero of ψ.  A local minimum is taken as
// a zero crossing when the straight lines through the two samples on either
// side meet at (nearly) zero height; the amplitude changes sign beyond it.
void restore_sign(std::vector<double>& s, double smax)
{
    const std::size_t n = s.size();
    if (n < 5) return;
    std::vector<double> cross;
    for (std::size_t i = 2; i + 2 < n; ++i) {
        if (!(s[i] <= s[i - 1] && s[i] < s[i + 1])) continue;
        if (s[i] > 1e-2 * smax) continue;
        const double sl = s[i - 1] - s[i - 2];  // per cell, negative on the way down
        const double sr = s[i + 2] - s[i + 1];
        if (!(sl < 0.0 && sr > 0.0)) continue;
        // lines y = s[i-1] + sl (k - (i-1)) and y = s[i+1] + sr (k - (i+1))
        const double k = (s[i + 1] - s[i - 1] + sl * (i - 1.0) - sr * (i + 1.0)) / (sl - sr);
        const double y = s[i - 1] + sl * (k - (i - 1.0));
        if (y < 0.05 * std::min(s[i - 1], s[i + 1])) cross.push_back(k);
    }
    double sign = 1.0;
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (c < cross.size() && static_cast<double>(i) > cross[c]) {
            sign = -sign;
            ++c;
        }
        s[i] *= sign;
    }
}

void require_beta(const PhysicalParams& p)
{
    if (!(p.beta > 0.0)) throw std::invalid_argument("deterministic limit has no overdamped drift (beta = 0)");
}

// V + V_qu where V_qu is continued linearly across masked
// regions, so the external force keeps acting there.
MaskedField total_potential(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, const Options& opt)
{
    MaskedField out;
    const Field v = V.evaluate(n.grid, p);
    if (!opt.quantum) {
        out.field = v;
        out.valid.assign(n.size(), 1);
        return out;
    }
    out = vqu(n, p, opt);
    continue_from_valid(out.field.values, out.valid);
    for (std::size_t i = 0; i < n.size(); ++i) out.field.values[i] += v.values[i];
    return out;
}

}  // namespace

Field PotentialSpec::evaluate(const Grid1D& g, const PhysicalParams& p) const
{
    switch (kind) {
        case Kind::harmonic:
            return numerics::sample(g, [&](double q) { return 0.5 * p.mass * omega * omega * q * q; });
        case Kind::free:
            return Field(g, 0.0);
        case Kind::custom:
            if (!(sampled.grid == g)) throw std::invalid_argument("custom potential grid mismatch");
            return sampled;
    }
    return Field(g, 0.0);
}

std::size_t MaskedField::count_valid() const
{
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

double MaskedField::max_abs_valid() const
{
    double m = 0.0;
    for (std::size_t i = 0; i < valid.size(); ++i)
        if (valid[i]) m = std::max(m, std::abs(field.values[i]));
    return m;
}

std::vector<std::uint8_t> node_mask(const DensityField& n, double node_tol)
{
    double smax = 0.0;
    for (double v : n.values) smax = std::max(smax, std::sqrt(std::max(v, 0.0)));
    std::vector<std::uint8_t> valid(n.size());
    for (std::size_t i = 0; i < n.size(); ++i)
        valid[i] = std::sqrt(std::max(n.values[i], 0.0)) >= node_tol * smax && smax > 0.0;
    return valid;
}

std::vector<std::uint8_t> support_mask(const DensityField& n, double rel)
{
    const double m = n.max();
    std::vector<std::uint8_t> valid(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) valid[i] = n.values[i] > rel * m;
    return valid;
}

MaskedField vqu(const DensityField& n, const PhysicalParams& p, const Options& opt)
{
    Field s(n.grid);
    double smax = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n.values[i] < 0.0 || !std::isfinite(n.values[i])) throw std::invalid_argument("density must be finite and non-negative");
        s.values[i] = std::sqrt(n.values[i]);
        smax = std::max(smax, s.values[i]);
    }
    if (smax == 0.0) throw std::invalid_argument("quantum potential of an all-zero density");
    if (opt.restore_sign) restore_sign(s.values, smax);

    const Field s2 = numerics::derivative(s, 2, opt.accuracy);
    const double pref = -p.hbar * p.hbar / (2.0 * p.mass);
    MaskedField out{Field(n.grid), std::vector<std::uint8_t>(n.size())};
    for (std::size_t i = 0; i < n.size(); ++i) {
        out.valid[i] = std::abs(s.values[i]) >= opt.node_tol * smax &&
                       n.values[i] >= opt.support_rel * smax * smax;
        out.field.values[i] = out.valid[i] ? pref * s2.values[i] / s.values[i] : 0.0;
    }
    return out;
}

Field vqu_log_form(const DensityField& n, const PhysicalParams& p, double eps_log, int accuracy)
{
    const Field l(n.grid, numerics::log_floored(n, eps_log));
    const Field l1 = numerics::derivative(l, 1, accuracy);
    const Field l2 = numerics::derivative(l, 2, accuracy);
    const double pref = -p.hbar * p.hbar / (4.0 * p.mass);
    Field out(n.grid);
    for (std::size_t i = 0; i < n.size(); ++i)
        out.values[i] = pref * (l2.values[i] + 0.5 * l1.values[i] * l1.values[i]);
    return out;
}

MaskedField acceleration_from(MaskedField vq, const PotentialSpec& V, const PhysicalParams& p, int accuracy)
{
    const Field v = V.evaluate(vq.field.grid, p);
    continue_from_valid(vq.field.values, vq.valid);
    for (std::size_t i = 0; i < v.size(); ++i) vq.field.values[i] += v.values[i];
    const Field du = numerics::derivative(vq.field, 1, accuracy);
    for (std::size_t i = 0; i < v.size(); ++i) vq.field.values[i] = -du.values[i] / p.mass;
    return vq;
}

MaskedField acceleration(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, const Options& opt)
{
    MaskedField u = total_potential(n, V, p, opt);
    const Field du = numerics::derivative(u.field, 1, opt.accuracy);
    MaskedField out{Field(n.grid), u.valid};
    for (std::size_t i = 0; i < n.size(); ++i) out.field.values[i] = -du.values[i] / p.mass;
    return out;
}

MaskedField drift(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, const Options& opt)
{
    require_beta(p);
    MaskedField out = acceleration(n, V, p, opt);
    for (double& v : out.field.values) v /= p.beta;
    return out;
}

MaskedField stationarity_residual(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p,
                                  const Options& opt)
{
    require_beta(p);
    MaskedField u = total_potential(n, V, p, opt);
    const Field du = numerics::derivative(u.field, 1, opt.accuracy);
    const Field l(n.grid, numerics::log_floored(n));
    const Field dl = numerics::derivative(l, 1, opt.accuracy);
    MaskedField out{Field(n.grid), u.valid};
    for (std::size_t i = 0; i < n.size(); ++i) {
        out.field.values[i] =
            out.valid[i] ? du.values[i] / (p.mass * p.beta) + p.diffusion * dl.values[i] : 0.0;
    }
    return out;
}

ClassicalLimit classical_limit_check(const DensityField& n, const PhysicalParams& p, double threshold)
{
    if (p.theta == 0.0) throw std::invalid_argument("classical-limit criterion undefined at zero noise");
    require_beta(p);
    MaskedField q = vqu(n, p);
    continue_from_valid(q.field.values, q.valid);
    const Field dq = numerics::derivative(q.field, 1, kAccuracy);
    const auto sup = support_mask(n, 1e-6);
    double force = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i)
        if (sup[i] && q.valid[i]) force = std::max(force, std::abs(dq.values[i]) / p.mass);
    const double noise =
        std::pow(p.beta, 1.5) * 0.5 * p.length * std::sqrt(p.kT() / (2.0 * p.hbar));
    ClassicalLimit r;
    r.ratio = force / noise;
    r.admissible = r.ratio < threshold;
    r.verdict = r.admissible ? "classical-limit admissible" : "not admissible";
    return r;
}

}  // namespace sqh::qpotential
