#pragma once

#include <cstdint>
#include <string>
#include <optional>
#include <vector>

#include "sqh/closure.hpp"
#include "sqh/numerics.hpp"
#include "sqh/params.hpp"
#include "sqh/qpotential.hpp"

namespace sqh::sde {

using numerics::DensityField;
using numerics::Field;
using numerics::Grid1D;
using params::PhysicalParams;
using qpotential::PotentialSpec;

// Drift K(q) and its gradient K'(q), both linearly interpolated.
struct DriftTable {
    Field K;
    Field dK;

    static DriftTable from_drift(const Field& K);
};

struct StepResult {
    double q = 0.0;
    bool reflected = false;
};

// q' = q + K Δt + ½ K' K Δt² + √D ΔW with ΔW = √(2Δt) ξ, ξ a standard normal.
// Positions leaving the grid are reflected back at the boundary.
StepResult step_overdamped(double q, const DriftTable& drift, const PhysicalParams& p, double dt, double xi,
                           bool second_order = true);

// Mirror q into [q_min, q_max].
double reflect(double q, const Grid1D& g, bool& reflected);

// Positions drawn from n by inverse CDF with counter-based uniforms.
std::vector<double> sample_inverse_cdf(const DensityField& n, std::size_t count, std::uint64_t seed);

// How the particle cloud is turned into the density that feeds V_qu.
//   kde:      linear binning, Gaussian smoothing with the Silverman bandwidth
//             h = 1.06 σ̂ N^{-1/5} (times bandwidth_scale)
//   hermite:  Gram-Charlier series φ(z) Σ_{k<=order} ⟨He_k(z)⟩/k! He_k(z), z = (q − μ̂)/σ̂
// The quantum potential takes third derivatives of the estimate; the kde
// estimate is too rough for that at practical N, so hermite is the default.
enum class Closure { hermite, kde };

struct ClosureSpec {
    Closure kind = Closure::hermite;
    int order = 4;
    double bandwidth_scale = 1.0;
};

struct DensityEstimate {
    DensityField density;
    std::optional<closure::HermiteSeries> series;  // hermite only
    double bandwidth = 0.0;  // kde only
    bool clipped = false;    // negative lobes removed before renormalization
};

DensityEstimate estimate_density(const std::vector<double>& q, const Grid1D& g, const ClosureSpec& spec = {});

struct Moments {
    double t = 0.0;
    double mean = 0.0;
    double variance = 0.0;
};

struct Snapshot {
    double t = 0.0;
    DensityField density;
};

struct SdeOptions {
    std::size_t n_traj = 10000;
    double dt = 0.01;
    double t_end = 1.0;
    // Steps between density/drift refreshes.  The quantum force restores the
    // ensemble width much faster than the mean relaxes, so an estimate held for
    // several steps overshoots; refresh every step.
    std::size_t resample_every = 1;
    std::size_t snapshot_every = 0;   // steps between stored snapshots; 0 stores first and last only
    std::uint64_t seed = 1;
    bool second_order_drift = true;
    bool quantum = true;              // false drops V_qu (classical runs)
    ClosureSpec closure;
    // V_qu of the estimate is used only where n > quantum_support · max n and
    // continued beyond, where the sample holds too few particles to fix it.
    double quantum_support = 1e-4;
    unsigned workers = 0;             // 0: hardware concurrency
};

struct SdeResult {
    std::vector<Snapshot> snapshots;  // estimated densities
    std::vector<Moments> moments;     // particle moments at every refresh
    std::vector<double> positions;    // final particle positions
    std::size_t steps = 0;
    std::size_t reflections = 0;
    std::size_t clip_events = 0;

    double reflection_rate() const;
};

// Overdamped ensemble with the mean-field closure: particles feed a density
// estimate whose quantum potential drives the drift.
SdeResult simulate_mean_field(const DensityField& n0, const PotentialSpec& V, const PhysicalParams& p,
                              const SdeOptions& opt);

struct UnderdampedResult : SdeResult {
    std::vector<double> velocities;
};

// q̈ = −β q̇ − (1/m) ∂(V + V_qu)/∂q + β√D ΔW/Δt with the same closure.  Splitting
// B-A-O-A-B; the O part is the exact Ornstein-Uhlenbeck velocity update.
// Velocities start at 0.
UnderdampedResult simulate_underdamped(const DensityField& n0, const PotentialSpec& V, const PhysicalParams& p,
                                       const SdeOptions& opt);

}  // namespace sqh::sde
