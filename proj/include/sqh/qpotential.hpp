#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqh/numerics.hpp"
#include "sqh/params.hpp"

namespace sqh::qpotential {

using numerics::DensityField;
using numerics::Field;
using numerics::Grid1D;
using params::PhysicalParams;

inline constexpr double kNodeTol = 1e-8;  // relative to max √n
inline constexpr int kAccuracy = 8;       // stencil accuracy for V_qu and its gradient

struct PotentialSpec {
    enum class Kind { harmonic, free, custom };
    Kind kind = Kind::harmonic;
    double omega = 1.0;
    Field sampled;  // used by Kind::custom

    static PotentialSpec harmonic(double omega) { return {Kind::harmonic, omega, {}}; }
    static PotentialSpec free() { return {Kind::free, 0.0, {}}; }
    static PotentialSpec custom(Field v) { return {Kind::custom, 0.0, std::move(v)}; }

    Field evaluate(const Grid1D& g, const PhysicalParams& p) const;
};

struct Options {
    double node_tol = kNodeTol;
    int accuracy = kAccuracy;
    bool quantum = true;  // false drops V_qu from forces (classical runs)
    bool restore_sign = true;  // differentiate the signed amplitude across nodes of ψ
    double support_rel = 0.0;  // also mask V_qu where n < support_rel · max n
};

// Field values with a validity flag per node.  vqu leaves 0 at invalid nodes;
// forces are computed from V plus a V_qu continued linearly across masked runs,
// so they are defined everywhere.
struct MaskedField {
    Field field;
    std::vector<std::uint8_t> valid;

    std::size_t count_valid() const;
    double max_abs_valid() const;
};

// √n < node_tol · max √n  ⇒ invalid.
std::vector<std::uint8_t> node_mask(const DensityField& n, double node_tol = kNodeTol);
// n > rel · max n  ⇒ valid.
std::vector<std::uint8_t> support_mask(const DensityField& n, double rel);

// −(ħ²/2m) (√n)'' / √n.
MaskedField vqu(const DensityField& n, const PhysicalParams& p, const Options& opt = {});

// −(ħ²/4m) (ln n'' + ½ (ln n')²) with the logarithm floored at eps_log · max n.
Field vqu_log_form(const DensityField& n, const PhysicalParams& p, double eps_log = numerics::kEpsLog,
                   int accuracy = kAccuracy);

// V_qu continued linearly across invalid runs (edge slope into tails), plus V,
// differentiated: −(1/m) ∂(V + V_qu)/∂q.  vq is consumed.
MaskedField acceleration_from(MaskedField vq, const PotentialSpec& V, const PhysicalParams& p,
                              int accuracy = kAccuracy);

// −(1/m) ∂(V + V_qu)/∂q, continued across masked nodes.
MaskedField acceleration(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p,
                         const Options& opt = {});

// −(1/(mβ)) ∂(V + V_qu)/∂q.
MaskedField drift(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, const Options& opt = {});

// (1/(mβ)) ∂(V + V_qu)/∂q + D ∂ln n/∂q; zero for a stationary density.
MaskedField stationarity_residual(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p,
                                  const Options& opt = {});

struct ClassicalLimit {
    double ratio = 0.0;
    bool admissible = false;
    std::string verdict;
};

// Ratio of the largest quantum acceleration |(1/m) ∂V_qu/∂q| on the support
// n > 1e-6 max n to the noise acceleration β^{3/2} (𝓛/2) √(kT/(2ħ)).
ClassicalLimit classical_limit_check(const DensityField& n, const PhysicalParams& p, double threshold = 0.01);

}  // namespace sqh::qpotential
