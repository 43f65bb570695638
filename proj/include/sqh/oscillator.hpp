#pragma once

#include <vector>

#include "sqh/numerics.hpp"
#include "sqh/params.hpp"

namespace sqh::oscillator {

using numerics::DensityField;
using numerics::Field;
using numerics::Grid1D;
using params::PhysicalParams;

// Physicists' Hermite polynomial by the three-term recurrence.
double hermite(int k, double x);

// Positive roots of H_k (and 0 for odd k), ascending.
std::vector<double> hermite_nonnegative_roots(int k);

struct Eigenstate {
    int j = 0;
    DensityField density;
    double energy = 0.0;
    double second_moment = 0.0;  // ⟨q²⟩ = (j + ½) ħ/(mω)
    double width2 = 0.0;         // 2⟨q²⟩; equals Δq0² = ħ/(mω) for j = 0
    bool truncated = false;
};

Eigenstate eigenstate(int j, const PhysicalParams& p, const Grid1D& g);

// Which correction equation to solve.
//   as_printed:  H f'' + f' (4j H_{j−1} − 2x H) = 8 H ln|H| + 4j x H_{j−1}
//   stationary:  H f'' + f' (4j H_{j−1} − 2x H) = 4κ H − 8 H ln|H| + 8j x H_{j−1}
// The second is the first-order stationarity condition of n ∝ H² e^{−a x² − 2Γθ f};
// κ is the eigenvalue that keeps f from growing like e^{x²}.
enum class BernoulliForm { stationary, as_printed };

struct BernoulliOptions {
    double window_cells = 4.0;  // exclusion half-width around each node of H_j, in grid cells
    int refine = 8;             // quadrature sub-steps per grid cell
    BernoulliForm form = BernoulliForm::stationary;
};

struct BernoulliResult {
    Field f;                    // f_j on the grid, function of q
    Field fprime;               // df_j/dx with x = q/Δq0
    std::vector<double> nodes;  // non-negative nodes of H_j in units of Δq0
    double kappa = 0.0;         // regularity constant (stationary form)
};

// Even solution with f(0) = f'(0) = 0, by nested quadrature with integrating
// factor μ = H² e^{−x²}: f'(x) = μ(x)^{-1} ∫_0^x μ S du.
BernoulliResult bernoulli_f(int j, const PhysicalParams& p, const Grid1D& g, const BernoulliOptions& opt = {});

// Inverse width a of the stationary noisy ground state, n ∝ exp(−a q²/Δq0²):
// a = √(1 + c²) − c with c = 2ΓkT/(ħω).
double ground_inverse_width(const PhysicalParams& p);

struct QuasiEigenstate {
    int j = 0;
    DensityField density;
    Field f;
    double energy = 0.0;           // (j+½)ħω + Γ kT (mω/ħ) Δq_j²
    double width2 = 0.0;           // Δq_j² = 2 ∫ n (q² + 2 Δq0² f) dq
    double width2_ref = 0.0;       // Δq² = Δq0² / a
    double width2_first_order = 0.0;  // Δq0² / (1 − 2Γθ)
    double delta = 0.0;            // Δ_j = Δq_j²/Δq² − 1
    double energy_hydro = 0.0;     // ∫ n (V + V_qu) dq
    double energy_spread = 0.0;    // std of V + V_qu under n
    double energy_spread_model = 0.0;  // √(3/8) Γ kT, j = 0 only
};

QuasiEigenstate quasi_eigenstate(int j, const PhysicalParams& p, const Grid1D& g, const BernoulliOptions& opt = {});

// Γ = √(8/3) ΔE0 / kT.
double gamma_from_energy_variance(double dE0, double kT);

// Γ = [Δq² / (Δq_j² − Δq_{j−1}²)] (E_gap − ħω) / kT.
double gamma_from_level_spacing(double E_gap, double dq2, double dq_j2, double dq_jm1_2, const PhysicalParams& p);

}  // namespace sqh::oscillator
