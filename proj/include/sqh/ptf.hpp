#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <vector>

#include "sqh/numerics.hpp"
#include "sqh/params.hpp"
#include "sqh/qpotential.hpp"

namespace sqh::ptf {

using numerics::DensityField;
using numerics::Field;
using numerics::Grid1D;
using params::PhysicalParams;
using qpotential::PotentialSpec;

inline constexpr double kBandSigmas = 10.0;   // kernel columns are cut at ±10σ
inline constexpr double kSupportRel = 1e-8;   // convergence norm support: n > 1e-8 max n
inline constexpr double kDivergence = 100.0;  // refinement abandoned once a norm exceeds 100x the best

// Which density the quantum part of the drift is computed from.
//   hermite: the Gram-Charlier series of n (same closure as the SDE ensemble)
//   grid:    n itself.  The overdamped quantum drift acts on n like a
//            hyperdiffusion with coefficient ħ²/(4m²β); explicit kernels and
//            plain refinement amplify grid-scale modes at any practical Δt,
//            so this mode is only usable for short, coarse runs.
enum class DriftDensity { hermite, grid };

struct KernelOptions {
    bool second_order = false;  // add ½ K' K Δt² to the column means
    DriftDensity density = DriftDensity::hermite;
    int closure_order = 4;
    double closure_support = 0.0;  // hermite: V_qu also masked where the series < this · max
    qpotential::Options qpot{};    // grid mode, and quantum on/off
};

// Drift field the kernels use for density n.
Field kernel_drift(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p,
                   const KernelOptions& opt = {});

// Banded column-stochastic Gaussian kernel K(q_i | q_j) on a grid.  Column j
// covers rows [lo[j], lo[j] + width[j]) and is scaled so that the trapezoid
// integral over destinations is 1.
struct TransitionKernel {
    Grid1D grid;
    double dt = 0.0;
    double sigma = 0.0;        // √(2DΔt)
    int order = 0;             // refinement order
    Field drift;               // drift used for the column means
    Field source_drift;        // drift of the density the step starts from
    std::vector<std::size_t> lo;
    std::vector<std::size_t> width;
    std::vector<std::size_t> offset;
    std::vector<double> values;

    double at(std::size_t dest, std::size_t src) const;
    double column_integral(std::size_t src) const;
    double column_mean(std::size_t src) const;
    double column_std(std::size_t src) const;
    std::vector<double> dense() const;  // row-major K[dest][src]
};

// Kernel from a given drift field: column means q_j + K_j Δt, variance 2DΔt.
TransitionKernel kernel_from_drift(const Field& drift, const PhysicalParams& p, double dt,
                                   const KernelOptions& opt = {});

// Zero-order kernel with the drift of n.  D = 0 is rejected.
TransitionKernel kernel_zero(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, double dt,
                             const KernelOptions& opt = {});

// n'(q) = ∫ K(q|z) n(z) dz by the trapezoid rule, renormalized.
DensityField propagate(const DensityField& n, const TransitionKernel& K);

// Kernel rebuilt with the midpoint drift ½(drift(n_now) + K_prev.source_drift).
TransitionKernel refine(const TransitionKernel& K_prev, const DensityField& n_now, const PotentialSpec& V,
                        const PhysicalParams& p, const KernelOptions& opt = {});

struct StepOptions {
    double tol = 1e-8;
    int max_refine = 8;
    // Depth-1 Anderson mixing of the density the refined drift is evaluated
    // on.  Same fixed point as plain refinement; plain refinement contracts
    // slowly when a shape mode relaxes at a rate near 2/Δt.
    bool accelerate = true;
    // A step that does not converge is redone as two half steps, at most this
    // many times over.
    int max_halvings = 3;
    KernelOptions kernel{};
};

struct StepResult {
    DensityField density;
    int iterations = 0;
    bool converged = false;
    std::vector<double> norms;  // drift change per refinement (last sub-step)
    std::size_t substeps = 1;
};

StepResult step(const DensityField& n, const PotentialSpec& V, const PhysicalParams& p, double dt,
                const StepOptions& opt = {});

struct EvolveOptions {
    double dt = 0.01;
    double t_end = 1.0;
    double stationarity_eps = 1e-6;  // stop once L1(n_{k+1}, n_k)/Δt falls below
    bool stop_when_stationary = true;
    std::size_t save_every = 0;      // 0 saves first and last only
    StepOptions step{};
};

struct EvolutionRecord {
    std::vector<double> times;
    std::vector<DensityField> snapshots;
    std::vector<int> iterations;               // per step
    std::vector<std::vector<double>> norms;    // per step
    std::size_t steps = 0;
    std::size_t nonconverged_steps = 0;
    bool stationary = false;
    double stationary_time = std::numeric_limits<double>::quiet_NaN();
    DensityField final_density;

    // Share of steps whose recorded norms never increase.
    double monotone_fraction() const;
};

EvolutionRecord evolve(const DensityField& n0, const PotentialSpec& V, const PhysicalParams& p,
                       const EvolveOptions& opt);

// Dense kernel as CSV (grids up to 512 points).
void write_kernel_csv(std::ostream& os, const TransitionKernel& K);

}  // namespace sqh::ptf
