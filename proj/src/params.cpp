#include "sqh/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sqh::params {

namespace {

void check_scales(const PhysicalParams& r, std::vector<std::string>& out)
{
    auto pos = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) out.push_back(std::string(name) + " must be positive and finite");
    };
    pos(r.mass, "mass");
    pos(r.hbar, "hbar");
    pos(r.omega, "omega");
    pos(r.length, "length");
    pos(r.chi_d, "chi_d");
    pos(r.c, "c");
    if (!(r.p > 0.0) || !std::isfinite(r.p)) out.push_back("p must be positive and finite");
    if (!(r.theta >= 0.0) || !std::isfinite(r.theta)) out.push_back("theta must be >= 0");
    if (!(r.gamma >= 0.0 && r.gamma < 1.0)) out.push_back("gamma must satisfy 0 <= gamma < 1");
    if (r.theta >= 0.0 && r.gamma >= 0.0 && 2.0 * r.gamma * r.theta >= 1.0)
        out.push_back("2*gamma*theta must be < 1");
}

}  // namespace

PhysicalParams natural(double theta, double gamma)
{
    PhysicalParams p;
    p.theta = theta;
    p.gamma = gamma;
    return derive(p);
}

std::vector<std::string> violations(const PhysicalParams& raw)
{
    std::vector<std::string> out;
    check_scales(raw, out);
    if (raw.theta == 0.0 && raw.gamma != 0.0) out.push_back("gamma must be 0 when theta = 0 (deterministic limit)");
    return out;
}

PhysicalParams derive(PhysicalParams r)
{
    std::vector<std::string> errs;
    check_scales(r, errs);
    if (!errs.empty()) throw std::invalid_argument(errs.front());

    if (r.theta == 0.0) {
        r.gamma = 0.0;
        r.lambda_c = std::numeric_limits<double>::infinity();
        r.diffusion = 0.0;
        r.beta = 0.0;
        return r;
    }
    const double kT = r.kT();
    r.lambda_c = std::sqrt(2.0) * r.hbar / std::sqrt(r.mass * kT);
    r.diffusion = r.chi_d * std::pow(r.length / r.lambda_c, r.p) * r.hbar / (2.0 * r.mass);
    r.beta = 4.0 * r.gamma * (kT / (r.chi_d * r.hbar)) * std::pow(r.lambda_c / r.length, r.p);
    return r;
}

double diffusion_p2(const PhysicalParams& p)
{
    return p.chi_d * p.length * p.length * p.kT() / (4.0 * p.hbar);
}

double beta_p2(const PhysicalParams& p)
{
    return 8.0 * p.hbar * p.gamma / (p.chi_d * p.mass * p.length * p.length);
}

double underdamped_noise_coefficient(const PhysicalParams& p)
{
    return 4.0 * p.hbar * p.gamma / (std::sqrt(p.chi_d) * p.mass * p.length) * std::sqrt(p.kT() / p.hbar);
}

PhysicalParams from_temperature(double mass_kg, double T_kelvin, double omega, double gamma,
                                double length_m, double chi_d, double p)
{
    PhysicalParams r;
    r.mass = mass_kg;
    r.hbar = si::hbar;
    r.omega = omega;
    r.theta = si::k_B * T_kelvin / (si::hbar * omega);
    r.gamma = gamma;
    r.length = length_m;
    r.chi_d = chi_d;
    r.p = p;
    r.c = si::c;
    return derive(r);
}

ChiDEstimate chi_d_estimate(double gamma, double density_fluct_var, double mean_density,
                            double a, double length, double mass, double T_kelvin)
{
    if (!(density_fluct_var > 0.0)) throw std::invalid_argument("density fluctuation variance must be positive");
    if (!(gamma > 0.0) || !(mean_density > 0.0) || !(a > 0.0) || !(length > 0.0) || !(mass > 0.0) ||
        !(T_kelvin > 0.0))
        throw std::invalid_argument("chi_d_estimate inputs must be positive");
    const double kT = si::k_B * T_kelvin;
    ChiDEstimate e;
    e.chi_d = 256.0 * (length * length) / (a * a) * gamma * gamma / density_fluct_var * std::sqrt(mass / kT);
    e.relative_fluctuation = std::sqrt(density_fluct_var) / mean_density;
    return e;
}

KineticsReport kinetics_window(const PhysicalParams& p, double drift_scale, double eps)
{
    KineticsReport r;
    if (p.beta == 0.0) {
        r.deterministic_limit = true;
        r.t_min = std::numeric_limits<double>::infinity();
        r.dt_min_overdamped = 0.0;
        r.notes.push_back("deterministic limit: beta = 0, window unbounded below");
    } else {
        r.t_min = 1.0 / p.beta;
        r.dt_min_overdamped = 10.0 / p.beta;
    }
    const double K = std::abs(drift_scale);
    if (K == 0.0) {
        r.drift_free = true;
        r.dt_min_noise = std::numeric_limits<double>::infinity();
        r.notes.push_back("drift-free region: kernel invalid");
    } else {
        r.dt_min_noise = p.diffusion / (eps * eps * K * K);
    }
    r.dt_min = std::max(r.dt_min_overdamped, r.dt_min_noise);
    return r;
}

UncertaintyBounds uncertainty_bounds(double mass_kg, double T_kelvin)
{
    if (!(mass_kg > 0.0) || !(T_kelvin > 0.0)) throw std::invalid_argument("mass and temperature must be positive");
    const double kT = si::k_B * T_kelvin;
    const double lambda_c = std::sqrt(2.0) * si::hbar / std::sqrt(mass_kg * kT);
    UncertaintyBounds u;
    u.dt_min = lambda_c / si::c;
    u.dE = std::sqrt(2.0 * mass_kg * si::c * si::c * kT);
    u.dE_dt_product = u.dE * u.dt_min;
    u.dp = std::sqrt(2.0 * mass_kg * kT);
    u.dL_dp_product = lambda_c * u.dp;
    return u;
}

}  // namespace sqh::params
