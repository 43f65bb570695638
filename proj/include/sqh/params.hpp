#pragma once

#include <limits>
#include <string>
#include <vector>

namespace sqh::params {

namespace si {
inline constexpr double hbar = 1.054571817e-34;   // J s
inline constexpr double k_B = 1.380649e-23;       // J / K
inline constexpr double c = 299792458.0;          // m / s
}  // namespace si

// Symbols: Γ = gamma, β = beta, ω = omega, λc = lambda_c, θ = kT/(ħω).
struct PhysicalParams {
    double mass = 1.0;
    double hbar = 1.0;
    double omega = 1.0;
    double theta = 0.0;
    double gamma = 0.0;
    double length = 1.4142135623730951;  // 𝓛; √2 makes D = θ/2 in natural units
    double chi_d = 1.0;
    double p = 2.0;
    double c = 1.0;

    // derived
    double lambda_c = std::numeric_limits<double>::infinity();
    double diffusion = 0.0;
    double beta = 0.0;

    double kT() const { return theta * hbar * omega; }
    bool operator==(const PhysicalParams&) const = default;
};

// m = ħ = ω = 1, 𝓛 = √2, χ_D = 1, derived.  Gives D = θ/2 and β = 4Γ.
PhysicalParams natural(double theta, double gamma);

// Fills the derived fields.  θ = 0 coerces Γ to 0 and yields D = β = 0.
// Throws std::invalid_argument on non-positive scales, Γ outside [0,1) or 2Γθ >= 1.
PhysicalParams derive(PhysicalParams raw);

// Strict validation used by the command line: every invariant violation,
// including a nonzero Γ at θ = 0 (which derive would silently coerce).
std::vector<std::string> violations(const PhysicalParams& raw);

// p = 2 closed forms: D = χ_D 𝓛² kT / (4ħ), β = 8ħΓ / (χ_D m 𝓛²).
double diffusion_p2(const PhysicalParams& p);
double beta_p2(const PhysicalParams& p);

// Velocity-noise coefficient of the underdamped equation for p = 2:
// 4ħΓ / (√χ_D m 𝓛) · √(kT/ħ).  Equals β·√D.
double underdamped_noise_coefficient(const PhysicalParams& p);

// Dimensionful parameter set built from a temperature in kelvin.
PhysicalParams from_temperature(double mass_kg, double T_kelvin, double omega, double gamma,
                                double length_m, double chi_d, double p = 2.0);

struct ChiDEstimate {
    double chi_d = 0.0;
    double relative_fluctuation = 0.0;  // ⟨δn²⟩^{1/2} / n̄, diagnostic only
};

ChiDEstimate chi_d_estimate(double gamma, double density_fluct_var, double mean_density,
                            double a, double length, double mass, double T_kelvin);

struct KineticsReport {
    double t_min = 0.0;             // 1/β, infinite in the deterministic limit
    double dt_min_overdamped = 0.0; // 10/β
    double dt_min_noise = 0.0;      // D / (ε K)²: smallest Δt with √(DΔt) <= ε|K|Δt
    double dt_min = 0.0;            // max of the two
    bool deterministic_limit = false;
    bool drift_free = false;
    std::vector<std::string> notes;
};

KineticsReport kinetics_window(const PhysicalParams& p, double drift_scale, double eps = 0.1);

struct UncertaintyBounds {
    double dt_min = 0.0;
    double dE = 0.0;
    double dE_dt_product = 0.0;
    double dp = 0.0;
    double dL_dp_product = 0.0;
};

// SI inputs; the products evaluate to 2ħ for every m, T.
UncertaintyBounds uncertainty_bounds(double mass_kg, double T_kelvin);

}  // namespace sqh::params
