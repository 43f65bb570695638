#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sqh/numerics.hpp"
#include "sqh/params.hpp"
#include "sqh/ptf.hpp"
#include "sqh/qpotential.hpp"
#include "sqh/sde.hpp"

namespace sqh::superposition {

using numerics::DensityField;
using numerics::Field;
using numerics::Grid1D;
using params::PhysicalParams;

inline constexpr int kModes = 3;
inline constexpr double kClassifyThreshold = 0.9;

struct Coefficient {
    double magnitude = 0.0;
    double phase = 0.0;

    std::complex<double> value() const { return std::polar(magnitude, phase); }
};

// ψ(t0) = Σ_j c_j e^{iφ_j} ψ_j with mode phase φ_j = (2j+1) ω (τ_{j+1} − t0/2).
struct SuperpositionSpec {
    std::array<Coefficient, kModes> coef{};
    double t0 = 0.0;
    std::array<double, kModes> tau{};

    static SuperpositionSpec from_magnitudes(double a, double b, double c, double t0 = 0.0);

    double weight_sum() const;
    int lowest_mode() const;  // -1 when all coefficients vanish
};

// Complex amplitude of the polynomial part, A(ξ) = Σ_j c_j e^{iφ_j} h_j(ξ) with
// h_0 = 1, h_1 = √2 ξ, h_2 = (2ξ² − 1)/√2 and ξ = q/Δq0, so n ∝ e^{−ξ²} |A|².
std::complex<double> amplitude(const SuperpositionSpec& s, const PhysicalParams& p, double xi);

DensityField initial_density(const SuperpositionSpec& s, const PhysicalParams& p, const Grid1D& g);

// Overdamped velocity of the interference part n₂ = n/n₁ (n₁ the ground
// Gaussian, whose own drift cancels against V):
//   v = (ħ²/(4m²β)) ∂_q [ (ln n₂)'' + ½ ((ln n₂)')² + (ln n₁)' (ln n₂)' ].
// Masked where |A|² < node_tol · max |A|²; zero there.
qpotential::MaskedField initial_velocity(const SuperpositionSpec& s, const PhysicalParams& p, const Grid1D& g,
                                         double node_tol = 1e-10);

// ∫ √(n₁ n₂) dq of the renormalized densities.
double bhattacharyya(const DensityField& a, const DensityField& b);

enum class Solver { ptf, sde };

Solver parse_solver(const std::string& name);
std::string to_string(Solver s);

struct RelaxOptions {
    Solver solver = Solver::ptf;
    double dt = 0.05;
    double t_end = 10.0;
    std::uint64_t seed = 1;
    std::size_t n_traj = 10000;      // sde
    std::size_t snapshots = 20;      // classification checkpoints along the run
    double stationarity_eps = 1e-4;  // ptf: stop once L1(n_{k+1}, n_k)/Δt falls below
    double converge_l1 = 0.02;       // sde: L1 between the last two checkpoints
    unsigned workers = 1;
    ptf::StepOptions ptf_step{};
    sde::ClosureSpec sde_closure{};
};

struct RelaxationOutcome {
    DensityField final_density;
    int classified = -1;  // -1: unresolved
    std::array<double, kModes> fidelity{};
    double relaxation_time = 0.0;  // first checkpoint from which the class stays fixed
    bool converged = false;
    std::string diagnostics;
};

// Candidate densities for classification: quasi_eigenstate(j), j = 0, 1, 2.
std::array<DensityField, kModes> candidates(const PhysicalParams& p, const Grid1D& g);

// Argmax of the fidelities when the largest reaches kClassifyThreshold, else -1.
int classify(const std::array<double, kModes>& fidelity);
std::array<double, kModes> fidelities(const DensityField& n, const std::array<DensityField, kModes>& cand);

RelaxationOutcome relax(const SuperpositionSpec& s, const PhysicalParams& p, const Grid1D& g, const RelaxOptions& opt,
                        const std::array<DensityField, kModes>* cand = nullptr);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Wilson score interval at z = 1.96.
Interval wilson(std::size_t successes, std::size_t n, double z = 1.959963984540054);

struct TrialRecord {
    std::size_t trial = 0;
    double t0 = 0.0;
    std::uint64_t seed = 0;
    int classified = -1;
    std::array<double, kModes> fidelity{};
    double relaxation_time = 0.0;
    bool converged = false;
};

struct BornStats {
    std::size_t trials = 0;
    std::array<std::size_t, kModes> counts{};
    std::size_t unresolved = 0;
    std::array<double, kModes> frequency{};
    std::array<Interval, kModes> ci{};
    std::array<double, kModes> target{};
    std::uint64_t seed = 0;
    double period = 0.0;
    std::vector<TrialRecord> log;
};

// T = 2πħ/E_min with E_min = (j_min + ½) ħω for the lowest mode present.
double cycle_period(const SuperpositionSpec& s, const PhysicalParams& p);

struct BornOptions {
    RelaxOptions relax{};
    unsigned workers = 0;  // trials in parallel; each trial runs single-threaded
};

// t0 of trial k is uniform on [0, T) from a counter draw on the run seed; the
// trial's noise seed is derive_seed(seed, k).
BornStats born_trials(const std::array<double, kModes>& magnitudes, const PhysicalParams& p, const Grid1D& g,
                      std::size_t n_trials, std::uint64_t seed, const BornOptions& opt);

}  // namespace sqh::superposition
