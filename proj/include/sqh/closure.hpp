#pragma once

#include <vector>

#include "sqh/numerics.hpp"
#include "sqh/params.hpp"
#include "sqh/qpotential.hpp"

namespace sqh::closure {

using numerics::DensityField;
using numerics::Grid1D;

// Gram-Charlier series n(q) ≈ φ(z)/σ Σ_{k<=K} c_k He_k(z), z = (q − μ)/σ,
// with c_k = ⟨He_k(z)⟩/k!.  The quantum potential needs third derivatives of
// the density it is fed; a short series keeps that smooth.
inline constexpr double kTailLevel = 0.5;  // see vqu
inline constexpr double kCoreLevel = 0.1;

struct HermiteSeries {
    double mean = 0.0;
    double sd = 1.0;
    std::vector<double> coef;
};

// Probabilists' Hermite polynomials He_0..He_K at z.
void hermite_e(double z, int K, double* out);

HermiteSeries hermite_series(const std::vector<double>& samples, int K);
HermiteSeries hermite_series(const DensityField& n, int K);

struct Smoothed {
    DensityField density;
    bool clipped = false;  // negative lobes removed before renormalization
};

Smoothed evaluate(const HermiteSeries& s, const Grid1D& g);

// Closed-form V_qu of the series density.  With P(z) = Σ c_k He_k(z)/c_0 and
// u = P'/P:  V_qu = −(ħ²/(4mσ²)) (u' − 1 + ½ (u − z)²).
// Valid where P > p_floor and φ(z)P(z) > support_rel · max, inside runs of
// P >= kTailLevel whose density peak reaches kCoreLevel · max; zero elsewhere.
qpotential::MaskedField vqu(const HermiteSeries& s, const Grid1D& g, const params::PhysicalParams& p,
                            double support_rel = 0.0, double p_floor = 1e-2);

// −(1/m) ∂(V + V_qu)/∂q with the closed-form V_qu continued across invalid runs.
numerics::Field acceleration(const HermiteSeries& s, const Grid1D& g, const qpotential::PotentialSpec& V,
                             const params::PhysicalParams& p, double support_rel = 0.0);

// acceleration / β.
numerics::Field drift(const HermiteSeries& s, const Grid1D& g, const qpotential::PotentialSpec& V,
                      const params::PhysicalParams& p, double support_rel = 0.0);

}  // namespace sqh::closure
